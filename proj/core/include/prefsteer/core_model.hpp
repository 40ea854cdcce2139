#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prefsteer/errors.hpp"

namespace prefsteer {

using TokenId = std::int32_t;
using TokenSeq = std::vector<TokenId>;

/// Sorted, duplicate-free list of token indices.
using TokenSet = std::vector<TokenId>;

/// Fingerprint of the vocabulary a distribution is defined over; 0 means "unspecified".
using VocabId = std::uint64_t;

inline constexpr double kSimplexTolerance = 1e-9;
inline constexpr double kLogNormTolerance = 1e-6;

/// Objective weights on the probability simplex. Immutable once built.
class Preference {
 public:
  /// Validates `raw` (non-empty, non-negative, sums to 1 within kSimplexTolerance).
  /// With `auto_normalize` the weights are divided by their sum first.
  static Preference make(std::span<const double> raw, bool auto_normalize = false);

  /// Uniform weights over `n` objectives.
  static Preference uniform(std::size_t n);

  std::span<const double> weights() const { return weights_; }
  std::size_t size() const { return weights_.size(); }
  double operator[](std::size_t i) const { return weights_[i]; }

  bool operator==(const Preference&) const = default;

 private:
  explicit Preference(std::vector<double> w) : weights_(std::move(w)) {}
  std::vector<double> weights_;
};

inline Preference make_preference(std::span<const double> raw, bool auto_normalize) {
  return Preference::make(raw, auto_normalize);
}

/// Normalized probability vector over a vocabulary.
class TokenDistribution {
 public:
  /// Throws NumericError unless every entry is finite, non-negative and the sum is 1
  /// within kSimplexTolerance.
  static TokenDistribution from_probs(std::vector<double> probs, VocabId vocab = 0);
  static TokenDistribution uniform(std::size_t size, VocabId vocab = 0);
  /// Point mass on `token`.
  static TokenDistribution one_hot(std::size_t size, TokenId token, VocabId vocab = 0);

  std::span<const double> probs() const { return probs_; }
  std::size_t size() const { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  VocabId vocab_id() const { return vocab_; }

  /// Lowest index among the maxima.
  TokenId argmax() const;

  bool operator==(const TokenDistribution&) const = default;

 private:
  TokenDistribution(std::vector<double> p, VocabId v) : probs_(std::move(p)), vocab_(v) {}
  std::vector<double> probs_;
  VocabId vocab_ = 0;
};

/// Normalized natural-log probabilities. Entries may be -inf for impossible tokens.
class LogProbVector {
 public:
  /// Throws NumericError on NaN/+inf or when logsumexp deviates from 0 by more than
  /// kLogNormTolerance.
  static LogProbVector from_logprobs(std::vector<double> logprobs);
  /// Subtracts logsumexp so the result is exactly normalized up to rounding.
  static LogProbVector normalized(std::vector<double> scores);
  static LogProbVector from_distribution(const TokenDistribution& dist);

  std::span<const double> values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  TokenDistribution to_distribution(VocabId vocab = 0) const;

  bool operator==(const LogProbVector&) const = default;

 private:
  explicit LogProbVector(std::vector<double> v) : values_(std::move(v)) {}
  std::vector<double> values_;
};

/// Expert (z+) and adversarial (z-) system prompts for one objective.
struct PromptPair {
  std::string objective_id;
  TokenSeq expert;
  TokenSeq adversarial;
  bool degenerate = false;

  /// Throws InvalidArgument when expert == adversarial and `degenerate` is not set.
  static PromptPair make(std::string objective_id, TokenSeq expert, TokenSeq adversarial,
                         bool degenerate = false);

  bool operator==(const PromptPair&) const = default;
};

struct GenParams {
  double nucleus_p = 0.95;
  double temperature = 1.0;
  int max_tokens = 128;
  double alpha = 0.1;
  std::uint64_t seed = 0;
  bool greedy = false;

  /// Throws InvalidArgument when a field is out of range.
  void validate() const;

  bool operator==(const GenParams&) const = default;
};

struct DialogueContext {
  TokenSeq query;
  TokenSeq prefix;
  std::optional<TokenSeq> system_prompt;

  bool operator==(const DialogueContext&) const = default;
};

/// Max-shifted log(sum(exp(x))). Returns -inf for an all -inf input.
double logsumexp(std::span<const double> xs);

/// exp(logits / T) / sum, with max subtraction. Throws NumericError on NaN or +inf.
TokenDistribution softmax(std::span<const double> logits, double temperature = 1.0,
                          VocabId vocab = 0);

/// Zeroes `dist` outside `subset` and rescales the rest to sum to 1.
/// Throws EmptySupport when the subset carries no mass.
TokenDistribution renormalize_over(const TokenDistribution& dist, const TokenSet& subset);

/// Sorts and deduplicates `tokens`.
TokenSet make_token_set(std::vector<TokenId> tokens);

}  // namespace prefsteer
