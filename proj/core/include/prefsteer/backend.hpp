#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "prefsteer/core_model.hpp"
#include "prefsteer/socket.hpp"
#include "prefsteer/vocab.hpp"

namespace prefsteer {

/// How a dialogue's system prompt combines with an optional base system prompt.
enum class PromptComposition {
  Replace,    ///< z replaces the base prompt; the base is used only when z is absent
  Accompany,  ///< base prompt, then z
};

struct ContextAssembly {
  PromptComposition composition = PromptComposition::Replace;
  TokenSeq base_system_prompt;

  bool operator==(const ContextAssembly&) const = default;
};

/// Flat token sequence sent to the model: [system prompt] query prefix.
TokenSeq flatten(const DialogueContext& ctx, const ContextAssembly& assembly = {});

/// Next-token probability provider. Implementations must be safe to call concurrently.
class LmBackend {
 public:
  explicit LmBackend(Vocabulary vocab, ContextAssembly assembly = {})
      : vocab_(std::move(vocab)), assembly_(std::move(assembly)) {}
  virtual ~LmBackend() = default;

  const Vocabulary& vocab() const { return vocab_; }
  const ContextAssembly& assembly() const { return assembly_; }

  /// Normalized log-probabilities of the next token. Deterministic in `ctx`.
  LogProbVector next_token_logprobs(const DialogueContext& ctx) const;

  /// Element i equals next_token_logprobs(ctxs[i]). Throws BatchEmpty on an empty list;
  /// per-element errors are rethrown with the element index in the message.
  std::vector<LogProbVector> batch_next_token_logprobs(
      std::span<const DialogueContext> ctxs) const;

  /// Same as the batch call but on already-flattened contexts. Throws InvalidArgument for
  /// token ids outside the vocabulary.
  std::vector<LogProbVector> flat_logprobs(std::span<const TokenSeq> contexts) const;

 protected:
  virtual std::vector<LogProbVector> query_flat(std::span<const TokenSeq> contexts) const = 0;

 private:
  Vocabulary vocab_;
  ContextAssembly assembly_;
};

/// Suffix-keyed lookup table: the longest suffix (up to `order` tokens) of the flat
/// context that has an entry decides the distribution, otherwise `fallback`.
struct ToyLmTable {
  int order = 1;
  Vocabulary vocab;
  TokenDistribution fallback = TokenDistribution::uniform(1);
  std::map<TokenSeq, TokenDistribution> entries;

  /// Uniform fallback and no entries.
  static ToyLmTable empty(Vocabulary vocab, int order);

  /// `{"order": j, "vocab": [...], "fallback": [...], "entries": {"a b": [...]}}`.
  /// `fallback` may be omitted (uniform); an optional "end_token" names the stop token.
  static ToyLmTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static ToyLmTable load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Adds or replaces the entry for a space-joined suffix of token strings.
  void set(std::string_view suffix, std::vector<double> probs);

  /// Throws InvalidArgument if order < 1 or any distribution has the wrong length.
  void validate() const;

  const TokenDistribution& lookup(std::span<const TokenId> flat_context) const;
};

class ToyLm final : public LmBackend {
 public:
  explicit ToyLm(ToyLmTable table, ContextAssembly assembly = {});
  const ToyLmTable& table() const { return table_; }

 protected:
  std::vector<LogProbVector> query_flat(std::span<const TokenSeq> contexts) const override;

 private:
  ToyLmTable table_;
  std::map<TokenSeq, LogProbVector> log_entries_;
  LogProbVector fallback_logprobs_;
};

/// Client for a server speaking the `logprobs` op of the line protocol. Every call opens
/// its own connection, pipelines all requests, then matches replies by id, so replies may
/// arrive in any order and concurrent calls never share a socket.
class RemoteLm final : public LmBackend {
 public:
  RemoteLm(Endpoint endpoint, Vocabulary vocab, ContextAssembly assembly = {},
           std::chrono::milliseconds timeout = std::chrono::seconds(30));
  const Endpoint& endpoint() const { return endpoint_; }

 protected:
  std::vector<LogProbVector> query_flat(std::span<const TokenSeq> contexts) const override;

 private:
  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
  mutable std::atomic<std::uint64_t> next_id_{1};
};

/// Plain autoregressive sampling with nucleus/temperature from `params`. The end token is
/// not included in the result.
TokenSeq complete(const LmBackend& backend, const DialogueContext& ctx, const GenParams& params,
                  std::uint64_t rng_seed);

/// Request handler answering `logprobs` requests from `backend`; use with LineServer.
std::string serve_logprobs(const LmBackend& backend, std::string_view request_line);

}  // namespace prefsteer
