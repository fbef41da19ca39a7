#pragma once

#include <cstddef>
#include <cstdint>

namespace dec {

/// Explicit-state PRNG (xoshiro256** seeded through splitmix64).
///
/// There is no global generator anywhere in the library: every stochastic
/// operation takes an Rng by reference and advances it. `fork(stream)`
/// derives an independent child generator from the original seed and a
/// stream id without touching the parent, so parallel or reordered work
/// (k-means restarts, per-layer pretraining) stays replayable.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept;
  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_index(std::uint64_t bound) noexcept;
  /// Standard normal via Box-Muller (portable across standard libraries).
  double normal() noexcept;
  double normal(double mean, double stddev) noexcept { return mean + stddev * normal(); }

  Rng fork(std::uint64_t stream) const noexcept;

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace dec
