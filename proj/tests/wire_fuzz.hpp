#pragma once

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "prefsteer/wire.hpp"

namespace prefsteer::testing {

using namespace prefsteer::wire;

inline constexpr double kWireInf = std::numeric_limits<double>::infinity();

// Random valid UTF-8 including control characters, quotes and multi-byte sequences.
inline std::string random_text(std::mt19937_64& gen) {
  static const std::vector<std::string> pieces{
      "a", "Z", " ", "\"", "\\", "\n", "\t", "\x01", "{", "}", "null", "\xC3\xA9", "\xE2\x82\xAC",
      "\xF0\x9F\x98\x80", "0", ","};
  std::uniform_int_distribution<std::size_t> len(0, 20), pick(0, pieces.size() - 1);
  std::string s;
  for (std::size_t i = len(gen); i > 0; --i) s += pieces[pick(gen)];
  return s;
}

inline TokenSeq random_tokens(std::mt19937_64& gen) {
  std::uniform_int_distribution<std::size_t> len(0, 12);
  std::uniform_int_distribution<TokenId> tok(0, std::numeric_limits<TokenId>::max());
  TokenSeq t(len(gen));
  for (auto& x : t) x = tok(gen);
  return t;
}

inline double random_double(std::mt19937_64& gen) {
  std::uniform_int_distribution<int> kind(0, 5);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  switch (kind(gen)) {
    case 0: return u(gen);
    case 1: return std::ldexp(u(gen), std::uniform_int_distribution<int>(-1000, 1000)(gen));
    case 2: return std::numeric_limits<double>::denorm_min() * std::uniform_int_distribution<int>(1, 9)(gen);
    case 3: return -0.0;
    case 4: return std::numeric_limits<double>::max();
    default: return 0.1 * std::uniform_int_distribution<int>(-50, 50)(gen);
  }
}

inline wire::Message random_message(std::mt19937_64& gen) {
  const std::uint64_t id = gen();
  switch (std::uniform_int_distribution<int>(0, 6)(gen)) {
    case 0: return LogprobsRequest{id, random_tokens(gen)};
    case 1: return ScoreRequest{id, random_text(gen), random_tokens(gen), random_tokens(gen)};
    case 2: {
      CompleteTextRequest r{id, random_text(gen), std::nullopt};
      if (gen() % 2) r.auth = random_text(gen);
      return r;
    }
    case 3: {
      LogprobsReply r{id, {}};
      for (std::size_t i = gen() % 17; i > 0; --i) {
        r.logprobs.push_back(gen() % 4 == 0 ? -kWireInf : random_double(gen));
      }
      return r;
    }
    case 4: return ScoreReply{id, random_double(gen)};
    case 5: return TextReply{id, random_text(gen)};
    default: return ErrorReply{id, random_text(gen)};
  }
}

inline bool same_bits(const wire::Message& a, const wire::Message& b) {
  if (a.index() != b.index()) return false;
  if (const auto* x = std::get_if<LogprobsReply>(&a)) {
    const auto& y = std::get<LogprobsReply>(b);
    if (x->id != y.id || x->logprobs.size() != y.logprobs.size()) return false;
    for (std::size_t i = 0; i < x->logprobs.size(); ++i) {
      if (std::signbit(x->logprobs[i]) != std::signbit(y.logprobs[i])) return false;
      if (x->logprobs[i] != y.logprobs[i]) return false;
    }
    return true;
  }
  return a == b;
}

}  // namespace prefsteer::testing
