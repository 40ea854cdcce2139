#pragma once

// Newline-delimited JSON messages shared by the remote LM, scorer and augmentation
// clients. One message per line; every request carries an id echoed by its reply.
//
//   {"id": 7, "op": "logprobs", "context": [3, 1, 4]}
//   {"id": 7, "logprobs": [-0.1, -2.4, null]}          null encodes -inf
//   {"id": 8, "op": "score", "objective": "verbose", "query": [..], "response": [..]}
//   {"id": 8, "score": 1.5}
//   {"id": 9, "op": "complete_text", "prompt": "...", "auth": "..."}
//   {"id": 9, "text": "..."}
//   {"id": 9, "error": "message"}

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "prefsteer/core_model.hpp"

namespace prefsteer::wire {

struct LogprobsRequest {
  std::uint64_t id = 0;
  TokenSeq context;
  bool operator==(const LogprobsRequest&) const = default;
};

struct ScoreRequest {
  std::uint64_t id = 0;
  std::string objective;
  TokenSeq query;
  TokenSeq response;
  bool operator==(const ScoreRequest&) const = default;
};

struct CompleteTextRequest {
  std::uint64_t id = 0;
  std::string prompt;
  std::optional<std::string> auth;
  bool operator==(const CompleteTextRequest&) const = default;
};

struct LogprobsReply {
  std::uint64_t id = 0;
  std::vector<double> logprobs;
  bool operator==(const LogprobsReply&) const = default;
};

struct ScoreReply {
  std::uint64_t id = 0;
  double score = 0.0;
  bool operator==(const ScoreReply&) const = default;
};

struct TextReply {
  std::uint64_t id = 0;
  std::string text;
  bool operator==(const TextReply&) const = default;
};

struct ErrorReply {
  std::uint64_t id = 0;
  std::string error;
  bool operator==(const ErrorReply&) const = default;
};

using Message = std::variant<LogprobsRequest, ScoreRequest, CompleteTextRequest, LogprobsReply,
                             ScoreReply, TextReply, ErrorReply>;

/// Single-line JSON, no trailing newline. Throws ProtocolError for NaN or +inf payloads.
std::string encode(const Message& msg);

/// Throws ProtocolError on malformed JSON, unknown ops or missing fields.
Message decode(std::string_view line);

std::uint64_t message_id(const Message& msg);

}  // namespace prefsteer::wire
