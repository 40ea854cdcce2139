#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "prefsteer/core_model.hpp"

namespace prefsteer {

/// Ordered token list with string forms. Ids are 0..size()-1.
///
/// There is no subword tokenizer: text is split on whitespace and every piece must be a
/// vocabulary entry, or maps to the `<unk>` entry when the vocabulary has one.
class Vocabulary {
 public:
  static constexpr std::string_view kEndToken = "<end>";
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary() = default;
  /// Throws InvalidArgument on an empty list, duplicates, or tokens containing whitespace.
  /// `end_token` overrides the default `<end>` convention; pass an empty string for none.
  explicit Vocabulary(std::vector<std::string> tokens,
                      std::optional<std::string> end_token = std::nullopt);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const;
  std::optional<TokenId> find(std::string_view token) const;
  /// Throws InvalidArgument when the token is absent.
  TokenId id(std::string_view token) const;

  std::optional<TokenId> end_id() const { return end_id_; }
  std::optional<TokenId> unk_id() const { return unk_id_; }
  VocabId fingerprint() const { return fingerprint_; }

  TokenSeq encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> tokens) const;
  /// Throws InvalidArgument when any id is outside the vocabulary.
  void check(std::span<const TokenId> tokens) const;

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_ && end_id_ == o.end_id_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
  std::optional<TokenId> end_id_;
  std::optional<TokenId> unk_id_;
  VocabId fingerprint_ = 0;
};

/// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> split_words(std::string_view text);

}  // namespace prefsteer
