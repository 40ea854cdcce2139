#pragma once

#include <cstdint>
#include <random>

#include "prefsteer/core_model.hpp"

namespace prefsteer {

/// SplitMix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed for stream `index` under `seed`. Distinct indices give unrelated streams.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index);

/// Deterministic generator. Uniform draws use the top 53 bits directly, so results do
/// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}
  /// Uniform in [0, 1).
  double uniform();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Smallest descending-probability prefix whose mass reaches `p` (ties by lower index).
TokenSet nucleus_support(const TokenDistribution& dist, double p);

/// Nucleus truncation, renormalization, temperature, then a categorical draw.
/// With `params.greedy` returns the argmax, lowest index on ties.
TokenId sample_token(const TokenDistribution& dist, const GenParams& params, Rng& rng);

}  // namespace prefsteer
