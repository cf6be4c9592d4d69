#pragma once

#include <cstdint>

namespace dc {

/// Deterministic stream of pseudo-random numbers.
///
/// xoshiro256++ (Blackman/Vigna published constants), state seeded through
/// splitmix64 from (seed, stream_id). The same (seed, stream_id) produces the
/// same sequence on every platform; distinct stream_ids give streams that are
/// safe to hand to independent workers.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();

  /// Uniform draw on the centered dyadic grid {(k+1/2)*2^-52 : 0 <= k < 2^52}.
  /// Every value lies strictly inside (0,1) and 1-u is exact in double, so the
  /// antithetic reflection is an exact involution.
  double uniform01();

  /// Uniform integer in [0, n), n >= 1. Multiply-shift bound (bias < n/2^64).
  std::uint64_t uniform_below(std::uint64_t n);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_;
  std::uint64_t stream_id_;
};

}  // namespace dc
