#pragma once

#include <cstddef>
#include <string_view>

namespace vaecert::num {

/// Contiguous double-array kernels behind all tensor arithmetic.
///
/// Every backend is required to produce bitwise-identical results to the
/// scalar reference table. Reductions use a fixed 4-accumulator strided
/// scheme (matching one AVX2 register of doubles) with a pinned combine
/// order, and no kernel uses fused multiply-add, so the choice of backend
/// never changes a single bit of any downstream result.
struct KernelTable {
  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double c, double* out, std::size_t n);
  void (*axpy)(double c, const double* x, double* y, std::size_t n);  // y += c*x
  void (*relu)(const double* a, double* out, std::size_t n);
  // out = g where x > 0, else 0 (backward pass of relu)
  void (*relu_mask)(const double* x, const double* g, double* out, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sumsq)(const double* a, std::size_t n);
  const char* name;
};

const KernelTable& scalar_kernels();

#if defined(__x86_64__) || defined(_M_X64)
const KernelTable& avx2_kernels();
bool avx2_supported();
#endif

/// Active table. Picked once on first use: AVX2 when the CPU supports it,
/// scalar otherwise. The VAECERT_KERNELS environment variable ("scalar",
/// "avx2", "auto") overrides the automatic choice.
const KernelTable& kernels();

/// Force a backend by name ("scalar", "avx2", "auto"). Throws
/// std::invalid_argument for unknown names or unsupported backends.
void force_kernels(std::string_view name);

}  // namespace vaecert::num
