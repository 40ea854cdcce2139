#pragma once

// Preference-aware contrastive decoding.
//
// Each objective i contributes an expert prompt z+_i and an adversarial prompt z-_i. At
// every step the engine queries the model under both prompts and scores token t by
//
//     s_t = log sum_i w_i * pi(t | x, z+_i, y<t) / pi(t | x, z-_i, y<t)
//
// then takes softmax(s), zeroes tokens outside the plausibility set
//
//     V_sub = { t : ref(t) > alpha * max ref },   ref = sum_i w_i pi(. | x, z+_i, y<t)
//
// and renormalizes. All ratio arithmetic happens in log space.

#include <exception>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefsteer/backend.hpp"
#include "prefsteer/core_model.hpp"
#include "prefsteer/sampling.hpp"

namespace prefsteer {

/// Log-probabilities below this are clamped before forming ratios, bounding any single
/// ratio by exp(160).
inline constexpr double kLogProbFloor = -80.0;

enum class DecodeMode {
  Contrast,  ///< weighted expert/adversarial ratios
  Ensemble,  ///< weighted mixture of expert distributions, no adversarial term
  Keyword,   ///< contrast with one-word objective prompts against the bare query
};

/// How per-objective ratios are combined.
enum class Combination {
  Arithmetic,  ///< log sum_i w_i ratio_i (default)
  Geometric,   ///< sum_i w_i log ratio_i
};

std::string_view to_string(DecodeMode m);
/// Throws InvalidArgument for unknown names.
DecodeMode parse_decode_mode(std::string_view s);
std::string_view to_string(Combination c);
Combination parse_combination(std::string_view s);

/// Prompt pairs aligned index-by-index with a preference.
class ObjectiveSet {
 public:
  /// Throws SimplexViolation when sizes differ and InvalidArgument on repeated ids.
  static ObjectiveSet make(std::vector<PromptPair> objectives, Preference preference);

  const std::vector<PromptPair>& objectives() const { return objectives_; }
  const Preference& preference() const { return preference_; }
  std::size_t size() const { return objectives_.size(); }

  ObjectiveSet with_preference(Preference p) const;

 private:
  ObjectiveSet(std::vector<PromptPair> o, Preference p)
      : objectives_(std::move(o)), preference_(std::move(p)) {}
  std::vector<PromptPair> objectives_;
  Preference preference_;
};

struct ContrastPair {
  LogProbVector expert;
  LogProbVector adversarial;
};

/// Audit record of one decode step. Objectives skipped because of zero weight have empty
/// log-probability vectors.
struct StepTrace {
  int step = 0;
  std::vector<std::vector<double>> expert_logprobs;
  std::vector<std::vector<double>> adversarial_logprobs;
  TokenSet mask;
  TokenDistribution final_dist = TokenDistribution::uniform(1);
  TokenId chosen = 0;

  bool operator==(const StepTrace&) const = default;
};

/// softmax(expert - adversarial). Throws VocabMismatch on a length mismatch.
TokenDistribution single_contrast_dist(const LogProbVector& expert,
                                       const LogProbVector& adversarial);

/// Preference-weighted ratio combination; objectives with zero weight are ignored.
/// Throws VocabMismatch or SimplexViolation (|pairs| != |preference|).
TokenDistribution multi_contrast_dist(std::span<const ContrastPair> pairs,
                                      const Preference& preference,
                                      Combination combination = Combination::Arithmetic);

/// { t : reference[t] > alpha * max(reference) }, with the maxima kept when alpha = 1.
TokenSet plausibility_mask(const TokenDistribution& reference, double alpha);

/// `contrast` restricted to `mask` and renormalized.
TokenDistribution finalize_dist(const TokenDistribution& contrast, const TokenSet& mask);

/// Mixture sum_i w_i pi_i of the expert distributions.
TokenDistribution ensemble_dist(std::span<const LogProbVector> experts,
                                const Preference& preference);

/// "A chat between a curious user and an artificial intelligence assistant. The assistant
/// gives {objective} answers to the user's questions."
std::string keyword_prompt_text(std::string_view objective_name);

/// Context whose flat form is the keyword template followed by `query`.
/// Throws InvalidArgument for an empty objective name.
DialogueContext keyword_prompt(const Vocabulary& vocab, std::string_view objective_name,
                               const TokenSeq& query);

struct GenerateOptions {
  DecodeMode mode = DecodeMode::Contrast;
  Combination combination = Combination::Arithmetic;
  bool record_trace = false;
};

struct Generation {
  TokenSeq tokens;
  std::vector<StepTrace> trace;

  bool operator==(const Generation&) const = default;
};

/// Raised when a backend call fails mid-generation. Holds the tokens and traces produced
/// before the failure and the original exception.
class GenerationAborted : public Error {
 public:
  GenerationAborted(const std::string& what, Generation partial, std::exception_ptr cause)
      : Error(what), partial_(std::move(partial)), cause_(std::move(cause)) {}
  const Generation& partial() const { return partial_; }
  std::exception_ptr cause() const { return cause_; }

 private:
  Generation partial_;
  std::exception_ptr cause_;
};

/// Full autoregressive generation. The RNG is seeded from `params.seed`. Stops at the
/// backend's end token (not included in the output) or after params.max_tokens tokens.
Generation generate(const LmBackend& backend, const ObjectiveSet& objectives,
                    const TokenSeq& query, const GenParams& params,
                    const GenerateOptions& options = {});

/// JSON-lines form of a trace, one step per line; -inf log-probabilities become null.
std::string trace_to_jsonl(std::span<const StepTrace> trace);

}  // namespace prefsteer
