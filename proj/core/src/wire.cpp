#include "prefsteer/wire.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace prefsteer::wire {

using nlohmann::json;

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

json tokens_json(const TokenSeq& ts) { return json(ts); }

TokenSeq tokens_from(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_array()) {
    throw ProtocolError(std::string("missing token array '") + field + "'");
  }
  TokenSeq out;
  out.reserve(j[field].size());
  for (const auto& v : j[field]) {
    if (!v.is_number_integer()) {
      throw ProtocolError(std::string("non-integer token in '") + field + "'");
    }
    const auto x = v.get<std::int64_t>();
    if (x < 0 || x > std::numeric_limits<TokenId>::max()) {
      throw ProtocolError(std::string("token id out of range in '") + field + "'");
    }
    out.push_back(static_cast<TokenId>(x));
  }
  return out;
}

std::string string_from(const json& j, const char* field) {
  if (!j.contains(field) || !j[field].is_string()) {
    throw ProtocolError(std::string("missing string field '") + field + "'");
  }
  return j[field].get<std::string>();
}

double finite_or_throw(double x, const char* what) {
  if (!std::isfinite(x)) throw ProtocolError(std::string(what) + " is not finite");
  return x;
}

}  // namespace

std::string encode(const Message& msg) {
  json j = std::visit(
      Overloaded{
          [](const LogprobsRequest& m) {
            return json{{"id", m.id}, {"op", "logprobs"}, {"context", tokens_json(m.context)}};
          },
          [](const ScoreRequest& m) {
            return json{{"id", m.id},
                        {"op", "score"},
                        {"objective", m.objective},
                        {"query", tokens_json(m.query)},
                        {"response", tokens_json(m.response)}};
          },
          [](const CompleteTextRequest& m) {
            json o{{"id", m.id}, {"op", "complete_text"}, {"prompt", m.prompt}};
            if (m.auth) o["auth"] = *m.auth;
            return o;
          },
          [](const LogprobsReply& m) {
            json arr = json::array();
            for (double x : m.logprobs) {
              if (x == -std::numeric_limits<double>::infinity()) {
                arr.push_back(nullptr);
              } else {
                arr.push_back(finite_or_throw(x, "log-probability"));
              }
            }
            return json{{"id", m.id}, {"logprobs", std::move(arr)}};
          },
          [](const ScoreReply& m) {
            return json{{"id", m.id}, {"score", finite_or_throw(m.score, "score")}};
          },
          [](const TextReply& m) { return json{{"id", m.id}, {"text", m.text}}; },
          [](const ErrorReply& m) { return json{{"id", m.id}, {"error", m.error}}; },
      },
      msg);
  return j.dump();
}

Message decode(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ProtocolError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("message is not a JSON object");
  if (!j.contains("id") || !j["id"].is_number_unsigned()) {
    throw ProtocolError("message has no unsigned integer 'id'");
  }
  const auto id = j["id"].get<std::uint64_t>();

  if (j.contains("op")) {
    const std::string op = string_from(j, "op");
    if (op == "logprobs") return LogprobsRequest{id, tokens_from(j, "context")};
    if (op == "score") {
      return ScoreRequest{id, string_from(j, "objective"), tokens_from(j, "query"),
                          tokens_from(j, "response")};
    }
    if (op == "complete_text") {
      CompleteTextRequest r{id, string_from(j, "prompt"), std::nullopt};
      if (j.contains("auth")) r.auth = string_from(j, "auth");
      return r;
    }
    throw ProtocolError("unknown op '" + op + "'");
  }
  if (j.contains("error")) return ErrorReply{id, string_from(j, "error")};
  if (j.contains("logprobs")) {
    const auto& arr = j["logprobs"];
    if (!arr.is_array()) throw ProtocolError("'logprobs' is not an array");
    LogprobsReply r{id, {}};
    r.logprobs.reserve(arr.size());
    for (const auto& v : arr) {
      if (v.is_null()) {
        r.logprobs.push_back(-std::numeric_limits<double>::infinity());
      } else if (v.is_number()) {
        r.logprobs.push_back(v.get<double>());
      } else {
        throw ProtocolError("non-numeric log-probability");
      }
    }
    return r;
  }
  if (j.contains("score")) {
    if (!j["score"].is_number()) throw ProtocolError("'score' is not a number");
    return ScoreReply{id, j["score"].get<double>()};
  }
  if (j.contains("text")) return TextReply{id, string_from(j, "text")};
  throw ProtocolError("message is neither a known request nor a known reply");
}

std::uint64_t message_id(const Message& msg) {
  return std::visit([](const auto& m) { return m.id; }, msg);
}

}  // namespace prefsteer::wire
