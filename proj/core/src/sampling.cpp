#include "prefsteer/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace prefsteer {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632BE59BD9B4E019ULL));
}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

TokenSet nucleus_support(const TokenDistribution& dist, double p) {
  std::vector<TokenId> order(dist.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) {
    return dist[static_cast<std::size_t>(a)] > dist[static_cast<std::size_t>(b)];
  });
  TokenSet keep;
  double mass = 0.0;
  for (TokenId t : order) {
    const double q = dist[static_cast<std::size_t>(t)];
    if (q <= 0.0) break;
    keep.push_back(t);
    mass += q;
    // Slack absorbs rounding in the running sum, e.g. p = 1 over many tokens.
    if (mass >= p - 1e-12) break;
  }
  return make_token_set(std::move(keep));
}

TokenId sample_token(const TokenDistribution& dist, const GenParams& params, Rng& rng) {
  if (params.greedy) return dist.argmax();

  const TokenSet support = nucleus_support(dist, params.nucleus_p);
  if (support.size() == 1) {
    // Still consume one draw so the stream advances identically on every step.
    rng.uniform();
    return support.front();
  }

  std::vector<double> weights(support.size());
  const double inv_t = 1.0 / params.temperature;
  double log_max = -INFINITY;
  for (std::size_t i = 0; i < support.size(); ++i) {
    weights[i] = std::log(dist[static_cast<std::size_t>(support[i])]) * inv_t;
    log_max = std::max(log_max, weights[i]);
  }
  double total = 0.0;
  for (double& w : weights) {
    w = std::exp(w - log_max);
    total += w;
  }

  const double u = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) {
    cum += weights[i];
    if (u < cum) return support[i];
  }
  return support.back();
}

}  // namespace prefsteer
