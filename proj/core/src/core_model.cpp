#include "prefsteer/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace prefsteer {

namespace {

template <typename E>
bool rethrow_as(const std::exception_ptr& ep, const std::string& prefix) {
  try {
    std::rethrow_exception(ep);
  } catch (const E& e) {
    throw E(prefix + e.what());
  } catch (...) {
  }
  return false;
}

}  // namespace

void rethrow_with_index(const char* what, std::size_t index) {
  auto ep = std::current_exception();
  const std::string prefix = std::string(what) + " " + std::to_string(index) + ": ";
  // Most-derived types first; the catch(...) in rethrow_as swallows non-matches.
  rethrow_as<SimplexViolation>(ep, prefix);
  rethrow_as<NumericError>(ep, prefix);
  rethrow_as<EmptySupport>(ep, prefix);
  rethrow_as<InvalidArgument>(ep, prefix);
  rethrow_as<BackendUnavailable>(ep, prefix);
  rethrow_as<ProtocolError>(ep, prefix);
  rethrow_as<BatchEmpty>(ep, prefix);
  rethrow_as<ScorerUnavailable>(ep, prefix);
  rethrow_as<VocabMismatch>(ep, prefix);
  rethrow_as<OddCapacity>(ep, prefix);
  rethrow_as<AugmentationFailed>(ep, prefix);
  rethrow_as<InductionFailed>(ep, prefix);
  rethrow_as<DegeneratePool>(ep, prefix);
  rethrow_as<InsufficientQueries>(ep, prefix);
  rethrow_as<DegenerateSample>(ep, prefix);
  rethrow_as<ConfigError>(ep, prefix);
  rethrow_as<Error>(ep, prefix);
  std::rethrow_exception(ep);
}

Preference Preference::make(std::span<const double> raw, bool auto_normalize) {
  if (raw.empty()) {
    throw SimplexViolation("preference must have at least one weight");
  }
  std::vector<double> w(raw.begin(), raw.end());
  for (double x : w) {
    if (!std::isfinite(x) || x < 0.0) {
      throw SimplexViolation("preference weight " + std::to_string(x) +
                             " is negative or not finite");
    }
  }
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  if (auto_normalize) {
    if (!(sum > 0.0)) {
      throw SimplexViolation("preference weights sum to zero; cannot normalize");
    }
    for (double& x : w) x /= sum;
  } else if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw SimplexViolation("preference weights sum to " + std::to_string(sum) +
                           ", expected 1");
  }
  return Preference(std::move(w));
}

Preference Preference::uniform(std::size_t n) {
  if (n == 0) throw SimplexViolation("preference must have at least one weight");
  return Preference(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

TokenDistribution TokenDistribution::from_probs(std::vector<double> probs, VocabId vocab) {
  if (probs.empty()) throw NumericError("distribution over an empty vocabulary");
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) {
      throw NumericError("distribution entry " + std::to_string(p) +
                         " is negative or not finite");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > kSimplexTolerance) {
    throw NumericError("distribution sums to " + std::to_string(sum));
  }
  return TokenDistribution(std::move(probs), vocab);
}

TokenDistribution TokenDistribution::uniform(std::size_t size, VocabId vocab) {
  if (size == 0) throw NumericError("distribution over an empty vocabulary");
  return TokenDistribution(std::vector<double>(size, 1.0 / static_cast<double>(size)), vocab);
}

TokenDistribution TokenDistribution::one_hot(std::size_t size, TokenId token, VocabId vocab) {
  if (token < 0 || static_cast<std::size_t>(token) >= size) {
    throw InvalidArgument("one_hot token out of range");
  }
  std::vector<double> p(size, 0.0);
  p[static_cast<std::size_t>(token)] = 1.0;
  return TokenDistribution(std::move(p), vocab);
}

TokenId TokenDistribution::argmax() const {
  return static_cast<TokenId>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

LogProbVector LogProbVector::from_logprobs(std::vector<double> logprobs) {
  if (logprobs.empty()) throw NumericError("log-probabilities over an empty vocabulary");
  for (double x : logprobs) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
      throw NumericError("log-probability is NaN or +inf");
    }
  }
  const double lse = logsumexp(logprobs);
  if (!(std::abs(lse) <= kLogNormTolerance)) {
    throw NumericError("log-probabilities are not normalized (logsumexp = " +
                       std::to_string(lse) + ")");
  }
  return LogProbVector(std::move(logprobs));
}

LogProbVector LogProbVector::normalized(std::vector<double> scores) {
  if (scores.empty()) throw NumericError("log-probabilities over an empty vocabulary");
  for (double x : scores) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
      throw NumericError("score is NaN or +inf");
    }
  }
  const double lse = logsumexp(scores);
  if (!std::isfinite(lse)) throw NumericError("all scores are -inf");
  for (double& x : scores) x -= lse;
  return LogProbVector(std::move(scores));
}

LogProbVector LogProbVector::from_distribution(const TokenDistribution& dist) {
  std::vector<double> v(dist.size());
  std::transform(dist.probs().begin(), dist.probs().end(), v.begin(),
                 [](double p) { return std::log(p); });
  return LogProbVector(std::move(v));
}

TokenDistribution LogProbVector::to_distribution(VocabId vocab) const {
  return softmax(values_, 1.0, vocab);
}

PromptPair PromptPair::make(std::string objective_id, TokenSeq expert, TokenSeq adversarial,
                            bool degenerate) {
  if (!degenerate && expert == adversarial) {
    throw InvalidArgument("prompt pair for '" + objective_id +
                          "' has identical expert and adversarial prompts");
  }
  return PromptPair{std::move(objective_id), std::move(expert), std::move(adversarial),
                    degenerate};
}

void GenParams::validate() const {
  if (!(nucleus_p > 0.0 && nucleus_p <= 1.0)) {
    throw InvalidArgument("nucleus_p must be in (0, 1]");
  }
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw InvalidArgument("temperature must be positive");
  }
  if (max_tokens < 0) throw InvalidArgument("max_tokens must be non-negative");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must be in [0, 1]");
}

double logsumexp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double acc = 0.0;
  for (double x : xs) acc += std::exp(x - m);
  return m + std::log(acc);
}

TokenDistribution softmax(std::span<const double> logits, double temperature, VocabId vocab) {
  if (!(temperature > 0.0)) throw InvalidArgument("softmax temperature must be positive");
  if (logits.empty()) throw NumericError("softmax of an empty vector");
  double m = -std::numeric_limits<double>::infinity();
  for (double x : logits) {
    if (std::isnan(x) || x == std::numeric_limits<double>::infinity()) {
      throw NumericError("softmax input is NaN or +inf");
    }
    m = std::max(m, x);
  }
  if (!std::isfinite(m)) throw NumericError("softmax input is entirely -inf");
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp((logits[i] - m) / temperature);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return TokenDistribution::from_probs(std::move(p), vocab);
}

TokenDistribution renormalize_over(const TokenDistribution& dist, const TokenSet& subset) {
  if (subset.empty()) throw EmptySupport("renormalization subset is empty");
  std::vector<double> p(dist.size(), 0.0);
  double mass = 0.0;
  for (TokenId t : subset) {
    if (t < 0 || static_cast<std::size_t>(t) >= dist.size()) {
      throw InvalidArgument("subset token " + std::to_string(t) + " outside vocabulary");
    }
    p[static_cast<std::size_t>(t)] = dist[static_cast<std::size_t>(t)];
  }
  // Sum in index order so the result does not depend on subset ordering.
  for (double x : p) mass += x;
  if (!(mass > 0.0)) throw EmptySupport("subset carries zero probability mass");
  for (double& x : p) x /= mass;
  return TokenDistribution::from_probs(std::move(p), dist.vocab_id());
}

TokenSet make_token_set(std::vector<TokenId> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
  return tokens;
}

}  // namespace prefsteer
