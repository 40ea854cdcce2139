#include "prefsteer/decoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>

namespace prefsteer {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double floored(double lp) { return std::max(lp, kLogProbFloor); }

void require_same_length(std::size_t expected, std::size_t got, const char* what) {
  if (expected != got) {
    throw VocabMismatch(std::string(what) + " has " + std::to_string(got) +
                        " entries, expected " + std::to_string(expected));
  }
}

// log sum_i w_i exp(x_i) over entries with w_i > 0; -inf when every such x_i is -inf.
double weighted_logsumexp(std::span<const double> x, std::span<const double> w) {
  double m = kNegInf;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] > 0.0) m = std::max(m, x[i]);
  }
  if (m == kNegInf) return kNegInf;
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (w[i] > 0.0) acc += w[i] * std::exp(x[i] - m);
  }
  return m + std::log(acc);
}

std::vector<double> as_vector(const LogProbVector& v) {
  return std::vector<double>(v.values().begin(), v.values().end());
}

}  // namespace

std::string_view to_string(DecodeMode m) {
  switch (m) {
    case DecodeMode::Contrast: return "contrast";
    case DecodeMode::Ensemble: return "ensemble";
    case DecodeMode::Keyword: return "keyword";
  }
  return "contrast";
}

DecodeMode parse_decode_mode(std::string_view s) {
  if (s == "contrast") return DecodeMode::Contrast;
  if (s == "ensemble") return DecodeMode::Ensemble;
  if (s == "keyword") return DecodeMode::Keyword;
  throw InvalidArgument("unknown decode mode '" + std::string(s) +
                        "' (expected contrast|ensemble|keyword)");
}

std::string_view to_string(Combination c) {
  return c == Combination::Geometric ? "geometric" : "arithmetic";
}

Combination parse_combination(std::string_view s) {
  if (s == "arithmetic") return Combination::Arithmetic;
  if (s == "geometric") return Combination::Geometric;
  throw InvalidArgument("unknown combination '" + std::string(s) +
                        "' (expected arithmetic|geometric)");
}

ObjectiveSet ObjectiveSet::make(std::vector<PromptPair> objectives, Preference preference) {
  if (objectives.size() != preference.size()) {
    throw SimplexViolation("preference has " + std::to_string(preference.size()) +
                           " weights for " + std::to_string(objectives.size()) + " objectives");
  }
  std::set<std::string> ids;
  for (const auto& o : objectives) {
    if (!ids.insert(o.objective_id).second) {
      throw InvalidArgument("objective id '" + o.objective_id + "' appears twice");
    }
  }
  return ObjectiveSet(std::move(objectives), std::move(preference));
}

ObjectiveSet ObjectiveSet::with_preference(Preference p) const { return make(objectives_, std::move(p)); }

TokenDistribution single_contrast_dist(const LogProbVector& expert,
                                       const LogProbVector& adversarial) {
  require_same_length(expert.size(), adversarial.size(), "adversarial log-probabilities");
  std::vector<double> s(expert.size());
  for (std::size_t t = 0; t < s.size(); ++t) {
    s[t] = floored(expert[t]) - floored(adversarial[t]);
  }
  return softmax(s);
}

TokenDistribution multi_contrast_dist(std::span<const ContrastPair> pairs,
                                      const Preference& preference, Combination combination) {
  if (pairs.size() != preference.size()) {
    throw SimplexViolation("preference has " + std::to_string(preference.size()) +
                           " weights for " + std::to_string(pairs.size()) + " prompt pairs");
  }
  const std::size_t vocab = pairs.front().expert.size();
  for (const auto& p : pairs) {
    require_same_length(vocab, p.expert.size(), "expert log-probabilities");
    require_same_length(vocab, p.adversarial.size(), "adversarial log-probabilities");
  }

  const auto w = preference.weights();
  std::vector<double> log_ratio(pairs.size());
  std::vector<double> s(vocab);
  for (std::size_t t = 0; t < vocab; ++t) {
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      log_ratio[i] = floored(pairs[i].expert[t]) - floored(pairs[i].adversarial[t]);
    }
    if (combination == Combination::Arithmetic) {
      s[t] = weighted_logsumexp(log_ratio, w);
    } else {
      double acc = 0.0;
      for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (w[i] > 0.0) acc += w[i] * log_ratio[i];
      }
      s[t] = acc;
    }
  }
  return softmax(s);
}

TokenSet plausibility_mask(const TokenDistribution& reference, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidArgument("alpha must be in [0, 1]");
  const auto p = reference.probs();
  const double top = *std::max_element(p.begin(), p.end());
  const double threshold = alpha * top;
  TokenSet mask;
  for (std::size_t t = 0; t < p.size(); ++t) {
    // At alpha = 1 nothing is strictly above the threshold; keep the maxima instead.
    const bool keep = alpha >= 1.0 ? p[t] == top : p[t] > threshold;
    if (keep) mask.push_back(static_cast<TokenId>(t));
  }
  return mask;
}

TokenDistribution finalize_dist(const TokenDistribution& contrast, const TokenSet& mask) {
  return renormalize_over(contrast, mask);
}

TokenDistribution ensemble_dist(std::span<const LogProbVector> experts,
                                const Preference& preference) {
  if (experts.size() != preference.size()) {
    throw SimplexViolation("preference has " + std::to_string(preference.size()) +
                           " weights for " + std::to_string(experts.size()) + " experts");
  }
  const std::size_t vocab = experts.front().size();
  for (const auto& e : experts) require_same_length(vocab, e.size(), "expert log-probabilities");

  const auto w = preference.weights();
  std::vector<double> column(experts.size());
  std::vector<double> s(vocab);
  for (std::size_t t = 0; t < vocab; ++t) {
    for (std::size_t i = 0; i < experts.size(); ++i) column[i] = experts[i][t];
    s[t] = weighted_logsumexp(column, w);
  }
  return softmax(s);
}

std::string keyword_prompt_text(std::string_view objective_name) {
  if (objective_name.empty()) throw InvalidArgument("keyword prompt needs an objective name");
  return "A chat between a curious user and an artificial intelligence assistant. "
         "The assistant gives " +
         std::string(objective_name) + " answers to the user's questions.";
}

DialogueContext keyword_prompt(const Vocabulary& vocab, std::string_view objective_name,
                               const TokenSeq& query) {
  return DialogueContext{query, {}, vocab.encode(keyword_prompt_text(objective_name))};
}

Generation generate(const LmBackend& backend, const ObjectiveSet& objectives,
                    const TokenSeq& query, const GenParams& params,
                    const GenerateOptions& options) {
  params.validate();
  const Vocabulary& vocab = backend.vocab();
  vocab.check(query);
  const std::size_t n = objectives.size();
  const auto w = objectives.preference().weights();
  const auto end = vocab.end_id();
  const bool contrastive = options.mode != DecodeMode::Ensemble;

  // System prompts per objective; std::nullopt means the bare query.
  std::vector<std::optional<TokenSeq>> expert_prompt(n), adversarial_prompt(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pair = objectives.objectives()[i];
    if (options.mode == DecodeMode::Keyword) {
      expert_prompt[i] = keyword_prompt(vocab, pair.objective_id, query).system_prompt;
    } else {
      vocab.check(pair.expert);
      vocab.check(pair.adversarial);
      expert_prompt[i] = pair.expert;
      adversarial_prompt[i] = pair.adversarial;
    }
  }

  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < n; ++i) {
    if (w[i] > 0.0) active.push_back(i);
  }
  std::vector<double> active_weights;
  for (std::size_t i : active) active_weights.push_back(w[i]);

  Rng rng(params.seed);
  Generation out;
  std::vector<DialogueContext> batch;
  for (int step = 0; step < params.max_tokens; ++step) {
    batch.clear();
    for (std::size_t i : active) {
      batch.push_back(DialogueContext{query, out.tokens, expert_prompt[i]});
      if (contrastive) batch.push_back(DialogueContext{query, out.tokens, adversarial_prompt[i]});
    }

    std::vector<LogProbVector> rows;
    try {
      rows = backend.batch_next_token_logprobs(batch);
    } catch (const std::exception& e) {
      throw GenerationAborted("generation aborted at step " + std::to_string(step) + ": " + e.what(),
                              std::move(out), std::current_exception());
    }

    const std::size_t stride = contrastive ? 2 : 1;
    std::vector<LogProbVector> experts;
    std::vector<ContrastPair> pairs;
    for (std::size_t a = 0; a < active.size(); ++a) {
      experts.push_back(rows[a * stride]);
      if (contrastive) pairs.push_back(ContrastPair{rows[a * stride], rows[a * stride + 1]});
    }
    // Zero-weight objectives were dropped, so the remaining weights still sum to one.
    const Preference active_pref = Preference::make(active_weights, false);

    const TokenDistribution reference = ensemble_dist(experts, active_pref);
    TokenSet mask = plausibility_mask(reference, params.alpha);
    if (end && reference[static_cast<std::size_t>(*end)] > 0.0) {
      mask.push_back(*end);
      mask = make_token_set(std::move(mask));
    }
    const TokenDistribution combined =
        contrastive ? multi_contrast_dist(pairs, active_pref, options.combination) : reference;
    const TokenDistribution final_dist = finalize_dist(combined, mask);
    const TokenId chosen = sample_token(final_dist, params, rng);

    if (options.record_trace) {
      StepTrace tr;
      tr.step = step;
      tr.expert_logprobs.resize(n);
      tr.adversarial_logprobs.resize(n);
      for (std::size_t a = 0; a < active.size(); ++a) {
        tr.expert_logprobs[active[a]] = as_vector(rows[a * stride]);
        if (contrastive) tr.adversarial_logprobs[active[a]] = as_vector(rows[a * stride + 1]);
      }
      tr.mask = mask;
      tr.final_dist = final_dist;
      tr.chosen = chosen;
      out.trace.push_back(std::move(tr));
    }
    if (end && chosen == *end) break;
    out.tokens.push_back(chosen);
  }
  return out;
}

std::string trace_to_jsonl(std::span<const StepTrace> trace) {
  auto logprob_array = [](const std::vector<double>& v) {
    nlohmann::json a = nlohmann::json::array();
    for (double x : v) {
      if (std::isfinite(x)) {
        a.push_back(x);
      } else {
        a.push_back(nullptr);
      }
    }
    return a;
  };
  std::string out;
  for (const auto& s : trace) {
    nlohmann::json experts = nlohmann::json::array(), adversarials = nlohmann::json::array();
    for (const auto& v : s.expert_logprobs) experts.push_back(logprob_array(v));
    for (const auto& v : s.adversarial_logprobs) adversarials.push_back(logprob_array(v));
    nlohmann::json line{
        {"step", s.step},
        {"experts", std::move(experts)},
        {"adversarials", std::move(adversarials)},
        {"mask", s.mask},
        {"final", std::vector<double>(s.final_dist.probs().begin(), s.final_dist.probs().end())},
        {"chosen", s.chosen}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace prefsteer
