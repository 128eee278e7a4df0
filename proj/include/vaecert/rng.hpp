#pragma once

#include <cstdint>

#include "vaecert/tensor.hpp"

namespace vaecert::num {

/// Counter-based random stream. Output i is a pure function of
/// (seed, stream_id, i), so streams can be replayed, split across workers
/// and advanced independently with no shared state. Distinct stream ids
/// give statistically independent sequences.
class RngStream {
 public:
  RngStream() : RngStream(0, 0) {}
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t counter() const { return counter_; }

  void reset() { counter_ = 0; }

  /// Derives an independent stream keyed by (this stream, k).
  RngStream substream(std::uint64_t k) const;

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal draw (Box-Muller; two uniforms per draw).
  double gaussian();
  /// Unbiased integer in [0, n) for shuffles.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

/// Tensor of i.i.d. standard-normal entries. The shape list must be
/// non-empty; zero extents yield an empty tensor.
Tensor gaussian_sample(RngStream& rng, const std::vector<std::size_t>& shape);

void gaussian_fill(RngStream& rng, Tensor& t);

/// Deterministic Fisher-Yates shuffle of [0, n).
std::vector<std::size_t> shuffled_indices(RngStream& rng, std::size_t n);

}  // namespace vaecert::num
