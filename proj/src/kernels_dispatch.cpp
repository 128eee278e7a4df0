#include "vaecert/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace vaecert::num {
namespace {

const KernelTable* pick_auto() {
#if defined(__x86_64__) || defined(_M_X64)
  if (avx2_supported()) return &avx2_kernels();
#endif
  return &scalar_kernels();
}

const KernelTable* pick_named(std::string_view name) {
  if (name == "scalar") return &scalar_kernels();
  if (name == "auto") return pick_auto();
#if defined(__x86_64__) || defined(_M_X64)
  if (name == "avx2") {
    if (!avx2_supported()) throw std::invalid_argument("kernels: avx2 not supported on this CPU");
    return &avx2_kernels();
  }
#endif
  throw std::invalid_argument("kernels: unknown backend '" + std::string(name) + "'");
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{nullptr};
  return slot;
}

}  // namespace

const KernelTable& kernels() {
  const KernelTable* t = active_slot().load(std::memory_order_acquire);
  if (t) return *t;
  const char* env = std::getenv("VAECERT_KERNELS");
  t = env ? pick_named(env) : pick_auto();
  active_slot().store(t, std::memory_order_release);
  return *t;
}

void force_kernels(std::string_view name) {
  active_slot().store(pick_named(name), std::memory_order_release);
}

}  // namespace vaecert::num
