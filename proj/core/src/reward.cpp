#include "prefsteer/reward.hpp"

#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "prefsteer/wire.hpp"

namespace prefsteer {

using nlohmann::json;

std::vector<double> RewardModel::score_batch(const TokenSeq& query,
                                             std::span<const TokenSeq> responses) const {
  std::vector<double> out;
  out.reserve(responses.size());
  for (std::size_t i = 0; i < responses.size(); ++i) {
    try {
      out.push_back(score(query, responses[i]));
    } catch (const Error&) {
      rethrow_with_index("response", i);
    }
  }
  return out;
}

LexicalRewardSpec LexicalRewardSpec::from_json(const json& j) {
  try {
    LexicalRewardSpec s;
    s.objective = j.at("objective").get<std::string>();
    if (j.contains("token_weights")) {
      s.token_weights = j.at("token_weights").get<std::map<std::string, double>>();
    }
    s.length_coeff = j.value("length_coeff", 0.0);
    if (s.objective.empty()) throw InvalidArgument("lexical reward spec has an empty objective");
    return s;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed lexical reward spec: ") + e.what());
  }
}

json LexicalRewardSpec::to_json() const {
  return json{{"objective", objective},
              {"token_weights", token_weights},
              {"length_coeff", length_coeff}};
}

LexicalRewardSpec LexicalRewardSpec::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open reward spec " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument("malformed reward spec " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void LexicalRewardSpec::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write reward spec " + path.string());
  out << to_json().dump(2) << '\n';
}

LexicalReward::LexicalReward(const LexicalRewardSpec& spec, const Vocabulary& vocab)
    : RewardModel(spec.objective),
      weight_by_id_(vocab.size(), 0.0),
      length_coeff_(spec.length_coeff) {
  if (!std::isfinite(length_coeff_)) throw InvalidArgument("length_coeff must be finite");
  for (const auto& [tok, w] : spec.token_weights) {
    if (!std::isfinite(w)) throw InvalidArgument("weight of '" + tok + "' is not finite");
    weight_by_id_[static_cast<std::size_t>(vocab.id(tok))] = w;
  }
}

double LexicalReward::score(const TokenSeq& /*query*/, const TokenSeq& response) const {
  double total = 0.0;
  for (TokenId t : response) {
    if (t < 0 || static_cast<std::size_t>(t) >= weight_by_id_.size()) {
      throw InvalidArgument("response token " + std::to_string(t) + " outside vocabulary");
    }
    total += weight_by_id_[static_cast<std::size_t>(t)];
  }
  return total + length_coeff_ * static_cast<double>(response.size());
}

RemoteReward::RemoteReward(std::string objective_id, Endpoint endpoint,
                           std::chrono::milliseconds timeout)
    : RewardModel(std::move(objective_id)), endpoint_(std::move(endpoint)), timeout_(timeout) {}

double RemoteReward::score(const TokenSeq& query, const TokenSeq& response) const {
  return score_batch(query, std::span(&response, 1)).front();
}

std::vector<double> RemoteReward::score_batch(const TokenSeq& query,
                                              std::span<const TokenSeq> responses) const {
  if (responses.empty()) return {};
  try {
    LineSocket sock = LineSocket::connect(endpoint_, timeout_);
    std::unordered_map<std::uint64_t, std::size_t> pending;
    for (std::size_t i = 0; i < responses.size(); ++i) {
      const auto id = next_id_.fetch_add(1);
      pending.emplace(id, i);
      sock.send_line(wire::encode(wire::ScoreRequest{id, objective_id(), query, responses[i]}));
    }
    std::vector<double> out(responses.size(), 0.0);
    while (!pending.empty()) {
      auto line = sock.read_line();
      if (!line) throw ScorerUnavailable("scorer closed the connection early");
      const auto msg = wire::decode(*line);
      auto it = pending.find(wire::message_id(msg));
      if (it == pending.end()) throw ScorerUnavailable("scorer replied with an unknown id");
      const std::size_t index = it->second;
      pending.erase(it);
      if (const auto* err = std::get_if<wire::ErrorReply>(&msg)) {
        throw ScorerUnavailable("response " + std::to_string(index) + ": " + err->error);
      }
      const auto* reply = std::get_if<wire::ScoreReply>(&msg);
      if (!reply || !std::isfinite(reply->score)) {
        throw ScorerUnavailable("response " + std::to_string(index) + ": malformed score reply");
      }
      out[index] = reply->score;
    }
    return out;
  } catch (const ScorerUnavailable&) {
    throw;
  } catch (const Error& e) {
    throw ScorerUnavailable("scorer " + endpoint_.to_string() + ": " + e.what());
  }
}

std::string serve_scores(std::span<const RewardModel* const> models,
                         std::string_view request_line) {
  std::uint64_t id = 0;
  try {
    const auto msg = wire::decode(request_line);
    id = wire::message_id(msg);
    const auto* req = std::get_if<wire::ScoreRequest>(&msg);
    if (!req) return wire::encode(wire::ErrorReply{id, "unsupported op"});
    for (const RewardModel* m : models) {
      if (m->objective_id() == req->objective) {
        return wire::encode(wire::ScoreReply{id, m->score(req->query, req->response)});
      }
    }
    return wire::encode(wire::ErrorReply{id, "unknown objective '" + req->objective + "'"});
  } catch (const std::exception& e) {
    return wire::encode(wire::ErrorReply{id, e.what()});
  }
}

}  // namespace prefsteer
