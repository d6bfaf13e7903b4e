#pragma once

#include <array>
#include <cstdint>

namespace pevdn {

// xoshiro256++ with SplitMix64 seeding.
//
// Splittable: split(stream) derives an independent child generator from the
// parent's seed and the stream tag, so every subsystem (exploration, secret
// sharing, DP noise, ...) owns its own stream and can be replayed in
// isolation. Uniform sampling below a bound uses rejection to avoid modulo
// bias.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1), 53 bits of precision.
  double next_double();

  // Standard normal via Box-Muller (consumes two uniform draws).
  double next_gaussian();

  // Uniform in [0, bound); bound must be nonzero.
  uint64_t uniform_below(uint64_t bound);

  // Independent child stream; deterministic in (seed, stream).
  Rng split(uint64_t stream) const;

  uint64_t seed() const { return seed_; }

 private:
  std::array<uint64_t, 4> state_{};
  uint64_t seed_ = 0;
};

}  // namespace pevdn
