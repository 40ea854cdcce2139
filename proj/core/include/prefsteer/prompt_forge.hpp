#pragma once

// Expert/adversarial prompt construction from reward-scored response pools.
//
// For each query a pool of m responses is sampled and scored. Each iteration asks an
// augmentation model for new responses using the top-m/2 (resp. bottom-m/2) entries as
// few-shot demonstrations, merges the results and keeps only the m/2 best and m/2 worst.
// The k queries with the widest reward range are then sent to an instruction-induction
// model, once to describe what separates best from worst (expert prompt) and once with
// the roles swapped (adversarial prompt).

#include <chrono>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "prefsteer/backend.hpp"
#include "prefsteer/core_model.hpp"
#include "prefsteer/reward.hpp"
#include "prefsteer/socket.hpp"
#include "prefsteer/vocab.hpp"

namespace prefsteer {

inline constexpr std::size_t kDefaultPoolCapacity = 4;
inline constexpr std::size_t kDefaultInductionQueries = 2;
inline constexpr int kDefaultMaxIterations = 3;
inline constexpr std::size_t kDefaultCountPerSide = 1;

enum class EntryOrigin { Init, AugmentHigh, AugmentLow };
std::string_view to_string(EntryOrigin o);
EntryOrigin parse_entry_origin(std::string_view s);

struct PoolEntry {
  TokenSeq response;
  double reward = 0.0;
  EntryOrigin origin = EntryOrigin::Init;
  int iteration = 0;

  bool operator==(const PoolEntry&) const = default;
};

/// Entries are kept sorted by reward descending; ties by response (lexicographic on token
/// ids), then by insertion order.
struct ResponsePool {
  std::string query_id;
  TokenSeq query;
  std::vector<PoolEntry> entries;
  std::size_t capacity = kDefaultPoolCapacity;
  int iteration = 0;

  double max_reward() const { return entries.front().reward; }
  double min_reward() const { return entries.back().reward; }
  double reward_range() const { return max_reward() - min_reward(); }
  bool full() const { return entries.size() == capacity; }

  /// Responses in pool order; equal memberships compare equal.
  std::vector<TokenSeq> membership() const;

  bool operator==(const ResponsePool&) const = default;
};

/// Per-iteration pool statistics.
struct IterationStats {
  int iteration = 0;
  double max_reward = 0.0;
  double min_reward = 0.0;
  double reward_range = 0.0;
  std::size_t max_length = 0;
  std::size_t min_length = 0;
  /// Spearman correlation of response length and reward; NaN when either is constant.
  double length_reward_rho = 0.0;
};
using PoolDynamics = std::vector<IterationStats>;

IterationStats pool_stats(const ResponsePool& pool);

enum class AugmentSide { High, Low };

struct AugmentRequest {
  AugmentSide side = AugmentSide::High;
  TokenSeq query;
  /// In template order: the most extreme reward (best for High, worst for Low) comes last.
  std::vector<PoolEntry> demonstrations;
  /// Rendered augmentation prompt for text-based clients.
  std::string prompt;
};

enum class InductionDirection { Expert, Adversarial };

struct InductionExemplar {
  TokenSeq query;
  TokenSeq chosen;
  TokenSeq rejected;

  bool operator==(const InductionExemplar&) const = default;
};

struct InductionRequest {
  InductionDirection direction = InductionDirection::Expert;
  std::vector<InductionExemplar> exemplars;
  std::string prompt;
};

/// External model used for response augmentation and instruction induction.
class AugmentationClient {
 public:
  virtual ~AugmentationClient() = default;
  /// Returns `count` new responses in the style of the demonstrations.
  virtual std::vector<TokenSeq> augment(const AugmentRequest& request, std::size_t count) = 0;
  /// Returns an instruction that encourages the chosen responses.
  virtual std::string induce(const InductionRequest& request) = 0;
};

/// Deterministic stand-in. The k-th High response is the best demonstration followed by
/// `high_append` repeated k+1 times; Low likewise with the worst demonstration. Induction
/// returns `instruction` for either direction.
class ScriptedAugmenter final : public AugmentationClient {
 public:
  ScriptedAugmenter(TokenSeq high_append, TokenSeq low_append, std::string instruction)
      : high_append_(std::move(high_append)),
        low_append_(std::move(low_append)),
        instruction_(std::move(instruction)) {}

  std::vector<TokenSeq> augment(const AugmentRequest& request, std::size_t count) override;
  std::string induce(const InductionRequest& request) override;

 private:
  TokenSeq high_append_;
  TokenSeq low_append_;
  std::string instruction_;
};

/// Text client for the `complete_text` op. The reply text is tokenized with `vocab`.
class RemoteAugmenter final : public AugmentationClient {
 public:
  RemoteAugmenter(Endpoint endpoint, Vocabulary vocab, std::optional<std::string> auth,
                  std::chrono::milliseconds timeout = std::chrono::seconds(120));

  std::vector<TokenSeq> augment(const AugmentRequest& request, std::size_t count) override;
  std::string induce(const InductionRequest& request) override;

 private:
  std::string complete_text(const std::string& prompt);

  Endpoint endpoint_;
  Vocabulary vocab_;
  std::optional<std::string> auth_;
  std::chrono::milliseconds timeout_;
  std::uint64_t next_id_ = 1;
};

std::string render_augmentation_prompt(std::string_view query,
                                       std::span<const std::string> demonstrations);

std::string render_induction_prompt(std::span<const std::string> queries,
                                    std::span<const std::string> chosen,
                                    std::span<const std::string> rejected);

/// "A chat between a user and an artificial intelligence assistant. The assistant gives
/// {descriptor} answers to the user's questions. For your answer, be aware that: {instruction}"
std::string prompt_scaffold(std::string_view descriptor, std::string_view instruction);

/// Throws OddCapacity unless m is even and >= 2.
ResponsePool init_pool(std::string query_id, const TokenSeq& query, std::size_t m,
                       const LmBackend& backend, const RewardModel& reward,
                       const GenParams& params, std::uint64_t seed);

/// One high-side and one low-side augmentation request, each returning `count_per_side`
/// scored entries. Client failures become AugmentationFailed.
std::vector<PoolEntry> augment(const ResponsePool& pool, AugmentationClient& client,
                               const RewardModel& reward, const Vocabulary& vocab,
                               std::size_t count_per_side = kDefaultCountPerSide);

/// Merges `new_entries` (responses already in the pool are dropped), keeps the m/2 highest
/// and m/2 lowest rewards and advances the iteration counter.
ResponsePool update_pool(const ResponsePool& pool, std::span<const PoolEntry> new_entries);

struct IterationResult {
  ResponsePool pool;
  PoolDynamics dynamics;
  bool converged = false;
  /// Set when augmentation failed; the pool holds the last completed iteration.
  std::optional<std::string> error;
};

/// Augment+update until membership stops changing or `max_iter` iterations completed.
IterationResult run_iterations(ResponsePool pool, AugmentationClient& client,
                               const RewardModel& reward, const Vocabulary& vocab,
                               int max_iter = kDefaultMaxIterations,
                               std::size_t count_per_side = kDefaultCountPerSide);

/// The k pools with the widest reward range (ties by query id). Throws InsufficientQueries.
std::vector<ResponsePool> select_queries(std::span<const ResponsePool> pools,
                                         std::size_t k = kDefaultInductionQueries);

struct InducedPrompts {
  std::string objective_id;
  std::string expert_instruction;
  std::string adversarial_instruction;
  std::string expert_text;
  std::string adversarial_text;
};

/// Builds both induction requests from `selected` and wraps the answers in the scaffold.
/// With `strict`, a pool whose best and worst rewards coincide raises DegeneratePool.
InducedPrompts induce_prompts(std::span<const ResponsePool> selected, AugmentationClient& client,
                              const Vocabulary& vocab, const std::string& objective_id,
                              bool strict = true);

/// Token form of induce_prompts. Throws InductionFailed when both prompts tokenize equally.
PromptPair induce_prompt_pair(std::span<const ResponsePool> selected, AugmentationClient& client,
                              const Vocabulary& vocab, const std::string& objective_id,
                              bool strict = true);

/// One adversarial prompt covering every objective, listing each adversarial instruction.
std::string joint_adversarial_text(std::span<const InducedPrompts> prompts);

/// `{"objectives": [{"id": "...", "expert": "<text>", "adversarial": "<text>"}]}`
struct PromptLibrary {
  struct Entry {
    std::string id;
    std::string expert;
    std::string adversarial;
    bool operator==(const Entry&) const = default;
  };
  std::vector<Entry> objectives;

  static PromptLibrary from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static PromptLibrary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const Entry& find(std::string_view id) const;
  /// Tokenized pairs in the order of `ids`. Throws ConfigError for ids without an entry.
  std::vector<PromptPair> pairs(const Vocabulary& vocab, std::span<const std::string> ids) const;

  bool operator==(const PromptLibrary&) const = default;
};

/// One JSON line per entry: {"query_id","iteration","response","reward","origin","created"}.
/// "iteration" is the pool snapshot, "created" the iteration that produced the entry.
std::string pool_to_jsonl(const ResponsePool& pool, const Vocabulary& vocab);

}  // namespace prefsteer
