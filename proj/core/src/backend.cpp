#include "prefsteer/backend.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "prefsteer/sampling.hpp"
#include "prefsteer/wire.hpp"

namespace prefsteer {

using nlohmann::json;

TokenSeq flatten(const DialogueContext& ctx, const ContextAssembly& assembly) {
  TokenSeq flat;
  flat.reserve(assembly.base_system_prompt.size() +
               (ctx.system_prompt ? ctx.system_prompt->size() : 0) + ctx.query.size() +
               ctx.prefix.size());
  const bool use_base = assembly.composition == PromptComposition::Accompany ||
                        !ctx.system_prompt.has_value();
  if (use_base) {
    flat.insert(flat.end(), assembly.base_system_prompt.begin(),
                assembly.base_system_prompt.end());
  }
  if (ctx.system_prompt) {
    flat.insert(flat.end(), ctx.system_prompt->begin(), ctx.system_prompt->end());
  }
  flat.insert(flat.end(), ctx.query.begin(), ctx.query.end());
  flat.insert(flat.end(), ctx.prefix.begin(), ctx.prefix.end());
  return flat;
}

LogProbVector LmBackend::next_token_logprobs(const DialogueContext& ctx) const {
  return std::move(batch_next_token_logprobs(std::span(&ctx, 1)).front());
}

std::vector<LogProbVector> LmBackend::batch_next_token_logprobs(
    std::span<const DialogueContext> ctxs) const {
  if (ctxs.empty()) throw BatchEmpty("batch of contexts is empty");
  std::vector<TokenSeq> flat;
  flat.reserve(ctxs.size());
  for (const auto& c : ctxs) flat.push_back(flatten(c, assembly_));
  return flat_logprobs(flat);
}

std::vector<LogProbVector> LmBackend::flat_logprobs(std::span<const TokenSeq> contexts) const {
  if (contexts.empty()) throw BatchEmpty("batch of contexts is empty");
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    try {
      vocab_.check(contexts[i]);
    } catch (const Error&) {
      rethrow_with_index("context", i);
    }
  }
  auto out = query_flat(contexts);
  if (out.size() != contexts.size()) {
    throw ProtocolError("backend returned " + std::to_string(out.size()) + " rows for " +
                        std::to_string(contexts.size()) + " contexts");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (out[i].size() != vocab_.size()) {
      throw ProtocolError("context " + std::to_string(i) + ": backend returned " +
                          std::to_string(out[i].size()) + " log-probabilities for a vocabulary of " +
                          std::to_string(vocab_.size()));
    }
  }
  return out;
}

// --- toy table -------------------------------------------------------------------------

namespace {

template <class V>
const V* longest_suffix_match(const std::map<TokenSeq, V>& table, std::span<const TokenId> flat,
                              int order) {
  const std::size_t longest = std::min<std::size_t>(static_cast<std::size_t>(order), flat.size());
  TokenSeq key;
  for (std::size_t len = longest; len >= 1; --len) {
    key.assign(flat.end() - static_cast<std::ptrdiff_t>(len), flat.end());
    if (auto it = table.find(key); it != table.end()) return &it->second;
  }
  return nullptr;
}

}  // namespace

ToyLmTable ToyLmTable::empty(Vocabulary vocab, int order) {
  ToyLmTable t;
  t.order = order;
  t.fallback = TokenDistribution::uniform(vocab.size(), vocab.fingerprint());
  t.vocab = std::move(vocab);
  t.validate();
  return t;
}

void ToyLmTable::set(std::string_view suffix, std::vector<double> probs) {
  TokenSeq key;
  for (const auto& w : split_words(suffix)) key.push_back(vocab.id(w));
  if (key.empty()) throw InvalidArgument("toy table key must contain at least one token");
  if (probs.size() != vocab.size()) {
    throw InvalidArgument("toy table entry '" + std::string(suffix) + "' has " +
                          std::to_string(probs.size()) + " probabilities, vocabulary has " +
                          std::to_string(vocab.size()));
  }
  entries.insert_or_assign(std::move(key),
                           TokenDistribution::from_probs(std::move(probs), vocab.fingerprint()));
}

void ToyLmTable::validate() const {
  if (order < 1) throw InvalidArgument("toy table order must be >= 1");
  if (fallback.size() != vocab.size()) {
    throw InvalidArgument("toy table fallback length does not match the vocabulary");
  }
  for (const auto& [key, dist] : entries) {
    if (key.empty()) throw InvalidArgument("toy table key must contain at least one token");
    if (dist.size() != vocab.size()) {
      throw InvalidArgument("toy table entry '" + vocab.decode(key) +
                            "' has the wrong number of probabilities");
    }
  }
}

const TokenDistribution& ToyLmTable::lookup(std::span<const TokenId> flat) const {
  const auto* hit = longest_suffix_match(entries, flat, order);
  return hit ? *hit : fallback;
}

ToyLmTable ToyLmTable::from_json(const json& j) {
  try {
    std::optional<std::string> end_token;
    if (j.contains("end_token")) end_token = j.at("end_token").get<std::string>();
    ToyLmTable t = empty(Vocabulary(j.at("vocab").get<std::vector<std::string>>(), end_token),
                         j.at("order").get<int>());
    if (j.contains("fallback")) {
      t.fallback = TokenDistribution::from_probs(j.at("fallback").get<std::vector<double>>(),
                                                 t.vocab.fingerprint());
    }
    for (const auto& [key, probs] : j.at("entries").items()) {
      t.set(key, probs.get<std::vector<double>>());
    }
    t.validate();
    return t;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed toy table: ") + e.what());
  } catch (const Error& e) {
    throw InvalidArgument(std::string("invalid toy table: ") + e.what());
  }
}

json ToyLmTable::to_json() const {
  json entries_json = json::object();
  for (const auto& [key, dist] : entries) {
    entries_json[vocab.decode(key)] = std::vector<double>(dist.probs().begin(), dist.probs().end());
  }
  json j{{"order", order},
         {"vocab", vocab.tokens()},
         {"fallback", std::vector<double>(fallback.probs().begin(), fallback.probs().end())},
         {"entries", std::move(entries_json)}};
  if (auto e = vocab.end_id(); e && vocab.token(*e) != Vocabulary::kEndToken) {
    j["end_token"] = vocab.token(*e);
  }
  return j;
}

ToyLmTable ToyLmTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open toy table " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidArgument("malformed toy table " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

void ToyLmTable::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot write toy table " + path.string());
  out << to_json().dump() << '\n';
}

ToyLm::ToyLm(ToyLmTable table, ContextAssembly assembly)
    : LmBackend(table.vocab, std::move(assembly)),
      table_(std::move(table)),
      fallback_logprobs_(LogProbVector::from_distribution(table_.fallback)) {
  table_.validate();
  for (const auto& [key, dist] : table_.entries) {
    log_entries_.emplace(key, LogProbVector::from_distribution(dist));
  }
}

std::vector<LogProbVector> ToyLm::query_flat(std::span<const TokenSeq> contexts) const {
  std::vector<LogProbVector> out;
  out.reserve(contexts.size());
  for (const auto& flat : contexts) {
    const auto* hit = longest_suffix_match(log_entries_, flat, table_.order);
    out.push_back(hit ? *hit : fallback_logprobs_);
  }
  return out;
}

// --- remote ----------------------------------------------------------------------------

RemoteLm::RemoteLm(Endpoint endpoint, Vocabulary vocab, ContextAssembly assembly,
                   std::chrono::milliseconds timeout)
    : LmBackend(std::move(vocab), std::move(assembly)),
      endpoint_(std::move(endpoint)),
      timeout_(timeout) {}

std::vector<LogProbVector> RemoteLm::query_flat(std::span<const TokenSeq> contexts) const {
  LineSocket sock = LineSocket::connect(endpoint_, timeout_);
  std::unordered_map<std::uint64_t, std::size_t> pending;
  for (std::size_t i = 0; i < contexts.size(); ++i) {
    const std::uint64_t id = next_id_.fetch_add(1);
    pending.emplace(id, i);
    sock.send_line(wire::encode(wire::LogprobsRequest{id, contexts[i]}));
  }
  std::vector<std::optional<LogProbVector>> rows(contexts.size());
  while (!pending.empty()) {
    auto line = sock.read_line();
    if (!line) {
      throw BackendUnavailable("server " + endpoint_.to_string() + " closed the connection with " +
                               std::to_string(pending.size()) + " replies outstanding");
    }
    const wire::Message msg = wire::decode(*line);
    auto it = pending.find(wire::message_id(msg));
    if (it == pending.end()) {
      throw ProtocolError("reply id " + std::to_string(wire::message_id(msg)) +
                          " does not match an outstanding request");
    }
    const std::size_t index = it->second;
    pending.erase(it);
    if (const auto* err = std::get_if<wire::ErrorReply>(&msg)) {
      throw BackendUnavailable("context " + std::to_string(index) + ": server error: " + err->error);
    }
    const auto* reply = std::get_if<wire::LogprobsReply>(&msg);
    if (!reply) throw ProtocolError("context " + std::to_string(index) + ": unexpected reply type");
    try {
      rows[index] = LogProbVector::normalized(reply->logprobs);
    } catch (const NumericError& e) {
      throw ProtocolError("context " + std::to_string(index) + ": " + e.what());
    }
  }
  std::vector<LogProbVector> out;
  out.reserve(rows.size());
  for (auto& r : rows) out.push_back(std::move(*r));
  return out;
}

std::string serve_logprobs(const LmBackend& backend, std::string_view request_line) {
  std::uint64_t id = 0;
  try {
    const wire::Message msg = wire::decode(request_line);
    id = wire::message_id(msg);
    const auto* req = std::get_if<wire::LogprobsRequest>(&msg);
    if (!req) return wire::encode(wire::ErrorReply{id, "unsupported op"});
    auto rows = backend.flat_logprobs(std::span(&req->context, 1));
    const auto v = rows.front().values();
    return wire::encode(wire::LogprobsReply{id, std::vector<double>(v.begin(), v.end())});
  } catch (const std::exception& e) {
    return wire::encode(wire::ErrorReply{id, e.what()});
  }
}

// --- sampling --------------------------------------------------------------------------

TokenSeq complete(const LmBackend& backend, const DialogueContext& ctx, const GenParams& params,
                  std::uint64_t rng_seed) {
  params.validate();
  Rng rng(rng_seed);
  DialogueContext running = ctx;
  TokenSeq out;
  const auto end = backend.vocab().end_id();
  for (int step = 0; step < params.max_tokens; ++step) {
    const auto lp = backend.next_token_logprobs(running);
    const TokenId tok = sample_token(lp.to_distribution(backend.vocab().fingerprint()), params, rng);
    if (end && tok == *end) break;
    out.push_back(tok);
    running.prefix.push_back(tok);
  }
  return out;
}

}  // namespace prefsteer
