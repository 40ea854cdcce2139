#include "prefsteer/prompt_forge.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "prefsteer/sampling.hpp"
#include "prefsteer/stats.hpp"
#include "prefsteer/wire.hpp"

namespace prefsteer {

namespace {

// Reward descending, then response lexicographic. Use with stable_sort so insertion
// order breaks the remaining ties.
bool pool_order(const PoolEntry& a, const PoolEntry& b) {
  if (a.reward != b.reward) return a.reward > b.reward;
  return a.response < b.response;
}

void require_full(const ResponsePool& pool, const char* op) {
  if (pool.capacity < 2 || pool.capacity % 2 != 0 || !pool.full()) {
    throw InvalidArgument(std::string(op) + ": pool '" + pool.query_id + "' is not full");
  }
}

std::vector<std::string> decode_all(const Vocabulary& vocab, std::span<const PoolEntry> entries) {
  std::vector<std::string> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(vocab.decode(e.response));
  return out;
}

}  // namespace

std::string_view to_string(EntryOrigin o) {
  switch (o) {
    case EntryOrigin::Init: return "init";
    case EntryOrigin::AugmentHigh: return "augment-high";
    case EntryOrigin::AugmentLow: return "augment-low";
  }
  return "init";
}

EntryOrigin parse_entry_origin(std::string_view s) {
  if (s == "init") return EntryOrigin::Init;
  if (s == "augment-high") return EntryOrigin::AugmentHigh;
  if (s == "augment-low") return EntryOrigin::AugmentLow;
  throw InvalidArgument("unknown entry origin '" + std::string(s) + "'");
}

std::vector<TokenSeq> ResponsePool::membership() const {
  std::vector<TokenSeq> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.response);
  return out;
}

IterationStats pool_stats(const ResponsePool& pool) {
  if (pool.entries.empty()) throw InvalidArgument("pool_stats on an empty pool");
  IterationStats s;
  s.iteration = pool.iteration;
  s.max_reward = pool.max_reward();
  s.min_reward = pool.min_reward();
  s.reward_range = pool.reward_range();
  std::vector<double> lengths, rewards;
  s.max_length = 0;
  s.min_length = std::numeric_limits<std::size_t>::max();
  for (const auto& e : pool.entries) {
    s.max_length = std::max(s.max_length, e.response.size());
    s.min_length = std::min(s.min_length, e.response.size());
    lengths.push_back(static_cast<double>(e.response.size()));
    rewards.push_back(e.reward);
  }
  s.length_reward_rho = pool.entries.size() >= 2 ? spearman_rho(lengths, rewards)
                                                 : std::numeric_limits<double>::quiet_NaN();
  return s;
}

std::vector<TokenSeq> ScriptedAugmenter::augment(const AugmentRequest& request,
                                                 std::size_t count) {
  if (request.demonstrations.empty()) throw InvalidArgument("augment request has no demonstrations");
  // The most extreme demonstration is last on both sides.
  const TokenSeq& base = request.demonstrations.back().response;
  const TokenSeq& append = request.side == AugmentSide::High ? high_append_ : low_append_;
  std::vector<TokenSeq> out;
  for (std::size_t k = 0; k < count; ++k) {
    TokenSeq r = base;
    for (std::size_t rep = 0; rep <= k; ++rep) r.insert(r.end(), append.begin(), append.end());
    out.push_back(std::move(r));
  }
  return out;
}

std::string ScriptedAugmenter::induce(const InductionRequest&) { return instruction_; }

RemoteAugmenter::RemoteAugmenter(Endpoint endpoint, Vocabulary vocab,
                                 std::optional<std::string> auth,
                                 std::chrono::milliseconds timeout)
    : endpoint_(std::move(endpoint)),
      vocab_(std::move(vocab)),
      auth_(std::move(auth)),
      timeout_(timeout) {}

std::string RemoteAugmenter::complete_text(const std::string& prompt) {
  auto sock = LineSocket::connect(endpoint_, timeout_);
  const std::uint64_t id = next_id_++;
  sock.send_line(wire::encode(wire::CompleteTextRequest{id, prompt, auth_}));
  auto line = sock.read_line();
  if (!line) throw BackendUnavailable("augmentation server closed the connection");
  const auto msg = wire::decode(*line);
  if (wire::message_id(msg) != id) throw ProtocolError("reply id does not match request id");
  if (const auto* err = std::get_if<wire::ErrorReply>(&msg)) {
    throw BackendUnavailable("augmentation server error: " + err->error);
  }
  const auto* text = std::get_if<wire::TextReply>(&msg);
  if (!text) throw ProtocolError("expected a text reply");
  return text->text;
}

std::vector<TokenSeq> RemoteAugmenter::augment(const AugmentRequest& request, std::size_t count) {
  std::vector<TokenSeq> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(vocab_.encode(complete_text(request.prompt)));
  return out;
}

std::string RemoteAugmenter::induce(const InductionRequest& request) {
  return complete_text(request.prompt);
}

std::string render_augmentation_prompt(std::string_view query,
                                       std::span<const std::string> demonstrations) {
  std::string out =
      "Given the user query to an open-domain AI assistant and several exemplary responses, "
      "could you please generate a new response?\n";
  out += "Instructions: ";
  out += query;
  out += '\n';
  for (std::size_t i = 0; i < demonstrations.size(); ++i) {
    out += "Example response " + std::to_string(i + 1) + ": " + demonstrations[i] + '\n';
  }
  out += "Your response:";
  return out;
}

std::string render_induction_prompt(std::span<const std::string> queries,
                                    std::span<const std::string> chosen,
                                    std::span<const std::string> rejected) {
  if (queries.size() != chosen.size() || queries.size() != rejected.size()) {
    throw InvalidArgument("induction prompt needs one chosen and one rejected response per query");
  }
  std::string out =
      "Please analyze the difference between the chosen and the rejected responses and provide "
      "an instruction to encourage the chosen response:";
  for (std::size_t i = 0; i < queries.size(); ++i) {
    out += "\nquery: " + queries[i];
    out += "\nchosen response: " + chosen[i];
    out += "\nrejected response: " + rejected[i];
  }
  return out;
}

std::string prompt_scaffold(std::string_view descriptor, std::string_view instruction) {
  std::string out = "A chat between a user and an artificial intelligence assistant. The assistant gives ";
  out += descriptor;
  out += " answers to the user's questions. For your answer, be aware that: ";
  out += instruction;
  return out;
}

ResponsePool init_pool(std::string query_id, const TokenSeq& query, std::size_t m,
                       const LmBackend& backend, const RewardModel& reward,
                       const GenParams& params, std::uint64_t seed) {
  if (m < 2 || m % 2 != 0) {
    throw OddCapacity("pool capacity must be even and at least 2, got " + std::to_string(m));
  }
  ResponsePool pool;
  pool.query_id = std::move(query_id);
  pool.query = query;
  pool.capacity = m;
  std::vector<TokenSeq> responses;
  const DialogueContext ctx{query, {}, std::nullopt};
  for (std::size_t i = 0; i < m; ++i) {
    responses.push_back(complete(backend, ctx, params, derive_seed(seed, i)));
  }
  const auto rewards = reward.score_batch(query, responses);
  for (std::size_t i = 0; i < m; ++i) {
    pool.entries.push_back(PoolEntry{std::move(responses[i]), rewards[i], EntryOrigin::Init, 0});
  }
  std::stable_sort(pool.entries.begin(), pool.entries.end(), pool_order);
  return pool;
}

std::vector<PoolEntry> augment(const ResponsePool& pool, AugmentationClient& client,
                               const RewardModel& reward, const Vocabulary& vocab,
                               std::size_t count_per_side) {
  require_full(pool, "augment");
  if (count_per_side == 0) return {};
  const std::size_t half = pool.capacity / 2;
  const std::string query_text = vocab.decode(pool.query);

  AugmentRequest high{AugmentSide::High, pool.query, {}, {}};
  for (std::size_t i = half; i-- > 0;) high.demonstrations.push_back(pool.entries[i]);
  AugmentRequest low{AugmentSide::Low, pool.query, {}, {}};
  for (std::size_t i = half; i < pool.capacity; ++i) low.demonstrations.push_back(pool.entries[i]);
  high.prompt = render_augmentation_prompt(query_text, decode_all(vocab, high.demonstrations));
  low.prompt = render_augmentation_prompt(query_text, decode_all(vocab, low.demonstrations));

  std::vector<PoolEntry> out;
  for (const AugmentRequest* req : {&high, &low}) {
    std::vector<TokenSeq> responses;
    try {
      responses = client.augment(*req, count_per_side);
    } catch (const std::exception& e) {
      throw AugmentationFailed("augmentation failed for query '" + pool.query_id + "': " + e.what());
    }
    if (responses.size() != count_per_side) {
      throw AugmentationFailed("augmentation client returned " + std::to_string(responses.size()) +
                               " responses, expected " + std::to_string(count_per_side));
    }
    for (const auto& r : responses) vocab.check(r);
    const auto rewards = reward.score_batch(pool.query, responses);
    const EntryOrigin origin =
        req->side == AugmentSide::High ? EntryOrigin::AugmentHigh : EntryOrigin::AugmentLow;
    for (std::size_t i = 0; i < responses.size(); ++i) {
      out.push_back(PoolEntry{std::move(responses[i]), rewards[i], origin, pool.iteration + 1});
    }
  }
  return out;
}

ResponsePool update_pool(const ResponsePool& pool, std::span<const PoolEntry> new_entries) {
  require_full(pool, "update_pool");
  std::set<TokenSeq> seen;
  std::vector<PoolEntry> merged = pool.entries;
  for (const auto& e : pool.entries) seen.insert(e.response);
  for (const auto& e : new_entries) {
    if (seen.insert(e.response).second) merged.push_back(e);
  }
  std::stable_sort(merged.begin(), merged.end(), pool_order);

  ResponsePool out = pool;
  out.iteration = pool.iteration + 1;
  out.entries.clear();
  const std::size_t half = pool.capacity / 2;
  out.entries.insert(out.entries.end(), merged.begin(), merged.begin() + static_cast<long>(half));
  out.entries.insert(out.entries.end(), merged.end() - static_cast<long>(half), merged.end());
  return out;
}

IterationResult run_iterations(ResponsePool pool, AugmentationClient& client,
                               const RewardModel& reward, const Vocabulary& vocab, int max_iter,
                               std::size_t count_per_side) {
  if (max_iter < 1) throw InvalidArgument("max_iter must be at least 1");
  IterationResult result;
  result.pool = std::move(pool);
  for (int it = 0; it < max_iter; ++it) {
    std::vector<PoolEntry> fresh;
    try {
      fresh = augment(result.pool, client, reward, vocab, count_per_side);
    } catch (const AugmentationFailed& e) {
      result.error = e.what();
      return result;
    }
    ResponsePool next = update_pool(result.pool, fresh);
    const bool unchanged = next.membership() == result.pool.membership();
    result.pool = std::move(next);
    result.dynamics.push_back(pool_stats(result.pool));
    if (unchanged) {
      result.converged = true;
      break;
    }
  }
  return result;
}

std::vector<ResponsePool> select_queries(std::span<const ResponsePool> pools, std::size_t k) {
  if (k == 0) throw InvalidArgument("select_queries needs k >= 1");
  if (k > pools.size()) {
    throw InsufficientQueries("need " + std::to_string(k) + " queries, have " +
                              std::to_string(pools.size()));
  }
  std::vector<ResponsePool> sorted(pools.begin(), pools.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const ResponsePool& a, const ResponsePool& b) {
    if (a.reward_range() != b.reward_range()) return a.reward_range() > b.reward_range();
    return a.query_id < b.query_id;
  });
  sorted.resize(k);
  return sorted;
}

InducedPrompts induce_prompts(std::span<const ResponsePool> selected, AugmentationClient& client,
                              const Vocabulary& vocab, const std::string& objective_id,
                              bool strict) {
  if (selected.empty()) throw InvalidArgument("induction needs at least one pool");
  InductionRequest expert{InductionDirection::Expert, {}, {}};
  InductionRequest adversarial{InductionDirection::Adversarial, {}, {}};
  std::vector<std::string> queries, best, worst;
  for (const auto& pool : selected) {
    if (pool.entries.empty()) throw InvalidArgument("pool '" + pool.query_id + "' is empty");
    if (strict && pool.max_reward() == pool.min_reward()) {
      throw DegeneratePool("pool '" + pool.query_id + "' has equal best and worst rewards");
    }
    const auto& hi = pool.entries.front().response;
    const auto& lo = pool.entries.back().response;
    expert.exemplars.push_back(InductionExemplar{pool.query, hi, lo});
    adversarial.exemplars.push_back(InductionExemplar{pool.query, lo, hi});
    queries.push_back(vocab.decode(pool.query));
    best.push_back(vocab.decode(hi));
    worst.push_back(vocab.decode(lo));
  }
  expert.prompt = render_induction_prompt(queries, best, worst);
  adversarial.prompt = render_induction_prompt(queries, worst, best);

  InducedPrompts out;
  out.objective_id = objective_id;
  try {
    out.expert_instruction = client.induce(expert);
    out.adversarial_instruction = client.induce(adversarial);
  } catch (const std::exception& e) {
    throw InductionFailed("instruction induction failed for '" + objective_id + "': " + e.what());
  }
  out.expert_text = prompt_scaffold(objective_id, out.expert_instruction);
  out.adversarial_text = prompt_scaffold("non-" + objective_id, out.adversarial_instruction);
  return out;
}

PromptPair induce_prompt_pair(std::span<const ResponsePool> selected, AugmentationClient& client,
                              const Vocabulary& vocab, const std::string& objective_id,
                              bool strict) {
  const auto induced = induce_prompts(selected, client, vocab, objective_id, strict);
  TokenSeq expert = vocab.encode(induced.expert_text);
  TokenSeq adversarial = vocab.encode(induced.adversarial_text);
  if (expert == adversarial) {
    throw InductionFailed("expert and adversarial prompts for '" + objective_id +
                          "' are identical after tokenization");
  }
  return PromptPair::make(objective_id, std::move(expert), std::move(adversarial));
}

std::string joint_adversarial_text(std::span<const InducedPrompts> prompts) {
  if (prompts.empty()) throw InvalidArgument("joint adversarial prompt needs an objective");
  std::string descriptor;
  std::string instructions;
  for (std::size_t i = 0; i < prompts.size(); ++i) {
    if (i > 0) descriptor += " and ";
    descriptor += "non-" + prompts[i].objective_id;
    instructions += "\n(" + std::to_string(i + 1) + ") " + prompts[i].adversarial_instruction;
  }
  return prompt_scaffold(descriptor, instructions);
}

PromptLibrary PromptLibrary::from_json(const nlohmann::json& j) {
  PromptLibrary lib;
  try {
    std::set<std::string> ids;
    for (const auto& o : j.at("objectives")) {
      Entry e{o.at("id").get<std::string>(), o.at("expert").get<std::string>(),
              o.at("adversarial").get<std::string>()};
      if (!ids.insert(e.id).second) throw ConfigError("prompt library repeats objective '" + e.id + "'");
      lib.objectives.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed prompt library: ") + e.what());
  }
  return lib;
}

nlohmann::json PromptLibrary::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : objectives) {
    arr.push_back({{"id", e.id}, {"expert", e.expert}, {"adversarial", e.adversarial}});
  }
  return {{"objectives", std::move(arr)}};
}

PromptLibrary PromptLibrary::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open prompt library " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse prompt library " + path.string() + ": " + e.what());
  }
}

void PromptLibrary::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

const PromptLibrary::Entry& PromptLibrary::find(std::string_view id) const {
  for (const auto& e : objectives) {
    if (e.id == id) return e;
  }
  throw ConfigError("prompt library has no objective '" + std::string(id) + "'");
}

std::vector<PromptPair> PromptLibrary::pairs(const Vocabulary& vocab,
                                             std::span<const std::string> ids) const {
  std::vector<PromptPair> out;
  for (const auto& id : ids) {
    const auto& e = find(id);
    out.push_back(PromptPair::make(e.id, vocab.encode(e.expert), vocab.encode(e.adversarial)));
  }
  return out;
}

std::string pool_to_jsonl(const ResponsePool& pool, const Vocabulary& vocab) {
  std::string out;
  for (const auto& e : pool.entries) {
    nlohmann::json line{{"query_id", pool.query_id},
                        {"iteration", pool.iteration},
                        {"response", vocab.decode(e.response)},
                        {"reward", e.reward},
                        {"origin", to_string(e.origin)},
                        {"created", e.iteration}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

}  // namespace prefsteer
