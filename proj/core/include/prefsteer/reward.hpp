#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "prefsteer/core_model.hpp"
#include "prefsteer/socket.hpp"
#include "prefsteer/vocab.hpp"

namespace prefsteer {

/// Scalar reward r_i(x, y) for one objective. Implementations must be thread-safe.
class RewardModel {
 public:
  explicit RewardModel(std::string objective_id) : objective_id_(std::move(objective_id)) {}
  virtual ~RewardModel() = default;

  const std::string& objective_id() const { return objective_id_; }

  virtual double score(const TokenSeq& query, const TokenSeq& response) const = 0;

  /// Elementwise score(); per-element failures carry the element index.
  virtual std::vector<double> score_batch(const TokenSeq& query,
                                          std::span<const TokenSeq> responses) const;

 private:
  std::string objective_id_;
};

/// Bag-of-tokens reward: sum of per-token weights plus length_coeff * length.
struct LexicalRewardSpec {
  std::string objective;
  std::map<std::string, double> token_weights;
  double length_coeff = 0.0;

  /// `{"objective": "...", "token_weights": {...}, "length_coeff": x}`
  static LexicalRewardSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  static LexicalRewardSpec load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  bool operator==(const LexicalRewardSpec&) const = default;
};

class LexicalReward final : public RewardModel {
 public:
  /// Throws InvalidArgument for non-finite weights or tokens missing from `vocab`.
  LexicalReward(const LexicalRewardSpec& spec, const Vocabulary& vocab);

  double score(const TokenSeq& query, const TokenSeq& response) const override;

 private:
  std::vector<double> weight_by_id_;
  double length_coeff_;
};

/// Client for the `score` op. Failures surface as ScorerUnavailable.
class RemoteReward final : public RewardModel {
 public:
  RemoteReward(std::string objective_id, Endpoint endpoint,
               std::chrono::milliseconds timeout = std::chrono::seconds(30));

  double score(const TokenSeq& query, const TokenSeq& response) const override;
  std::vector<double> score_batch(const TokenSeq& query,
                                  std::span<const TokenSeq> responses) const override;

 private:
  Endpoint endpoint_;
  std::chrono::milliseconds timeout_;
  mutable std::atomic<std::uint64_t> next_id_{1};
};

/// Request handler answering `score` requests with the model whose objective matches.
std::string serve_scores(std::span<const RewardModel* const> models,
                         std::string_view request_line);

}  // namespace prefsteer
