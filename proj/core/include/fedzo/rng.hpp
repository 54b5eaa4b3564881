#pragma once

#include <cstdint>
#include <string_view>

#include "fedzo/vec.hpp"

namespace fedzo {

/// Counter-based splittable random stream.
///
/// The generator is SplitMix64: the state is an affine counter and each
/// output is a bijective mix of it, so a stream is fully determined by its
/// seed and the number of values drawn. Substreams are derived by hashing
/// (parent seed, label, index), never from the current position, which makes
/// the stream layout of an experiment independent of the order in which
/// substreams are created. Every distribution below is implemented on top of
/// next_u64() with fixed arithmetic, so sequences are bit-reproducible across
/// platforms and across serial/parallel execution.
class RngStream {
 public:
  RngStream() : RngStream(0) {}
  explicit RngStream(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53-bit resolution.
  double next_double();

  /// Standard normal via Box-Muller; consumes exactly two uniforms.
  double next_gaussian();

  NumVec gaussian_vector(std::size_t dim);

  /// Uniform in [lo, hi).
  double next_uniform(double lo, double hi);

  /// Uniform integer in [0, n), n >= 1. Uses 64-bit multiply-shift.
  std::uint64_t next_below(std::uint64_t n);

  /// Child stream identified by (this stream's seed, label, index).
  RngStream substream(std::string_view label, std::uint64_t index = 0) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

}  // namespace fedzo
