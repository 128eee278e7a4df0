#include "vaecert/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace vaecert::num {
namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  base_ = mix64(mix64(seed + kGolden) ^ mix64(stream_id + 0xD1B54A32D192ED03ull));
}

RngStream RngStream::substream(std::uint64_t k) const {
  return RngStream(seed_, mix64(stream_id_ + kGolden * (k + 1)));
}

std::uint64_t RngStream::next_u64() {
  return mix64(base_ + kGolden * ++counter_);
}

double RngStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::gaussian() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RngStream::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

Tensor gaussian_sample(RngStream& rng, const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw std::invalid_argument("gaussian_sample: extents must be non-empty");
  Tensor t(shape);
  gaussian_fill(rng, t);
  return t;
}

void gaussian_fill(RngStream& rng, Tensor& t) {
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.gaussian();
}

std::vector<std::size_t> shuffled_indices(RngStream& rng, std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace vaecert::num
