#include "prefsteer/vocab.hpp"

#include <cctype>

namespace prefsteer {

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, std::optional<std::string> end_token)
    : tokens_(std::move(tokens)) {
  if (tokens_.empty()) throw InvalidArgument("vocabulary must not be empty");
  // FNV-1a over the token strings, separated by a NUL byte.
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty() || split_words(t).size() != 1) {
      throw InvalidArgument("vocabulary token '" + t + "' is empty or contains whitespace");
    }
    if (!index_.emplace(t, static_cast<TokenId>(i)).second) {
      throw InvalidArgument("duplicate vocabulary token '" + t + "'");
    }
    for (unsigned char c : t) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h *= 1099511628211ULL;  // separator
  }
  fingerprint_ = h == 0 ? 1 : h;

  const std::string end = end_token.value_or(std::string(kEndToken));
  if (!end.empty()) {
    if (auto e = find(end)) {
      end_id_ = *e;
    } else if (end_token) {
      throw InvalidArgument("end token '" + end + "' is not in the vocabulary");
    }
  }
  unk_id_ = find(kUnkToken);
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw InvalidArgument("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const {
  if (auto t = find(token)) return *t;
  throw InvalidArgument("token '" + std::string(token) + "' is not in the vocabulary");
}

TokenSeq Vocabulary::encode(std::string_view text) const {
  TokenSeq out;
  for (const auto& w : split_words(text)) {
    if (auto t = find(w)) {
      out.push_back(*t);
    } else if (unk_id_) {
      out.push_back(*unk_id_);
    } else {
      throw InvalidArgument("word '" + w + "' is not in the vocabulary and there is no " +
                            std::string(kUnkToken));
    }
  }
  return out;
}

std::string Vocabulary::decode(std::span<const TokenId> tokens) const {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += token(tokens[i]);
  }
  return out;
}

void Vocabulary::check(std::span<const TokenId> tokens) const {
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= tokens_.size()) {
      throw InvalidArgument("token id " + std::to_string(t) + " outside vocabulary of size " +
                            std::to_string(tokens_.size()));
    }
  }
}

}  // namespace prefsteer
