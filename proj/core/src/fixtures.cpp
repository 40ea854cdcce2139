#include "prefsteer/fixtures.hpp"

#include <array>

#include "prefsteer/decoder.hpp"

namespace prefsteer::fixtures {

namespace {

// Probabilities of <end>, word, please, um.
using Style = std::array<double, 4>;

constexpr Style kPlain{0.15, 0.25, 0.20, 0.40};
constexpr Style kVerboseExpert{0.02, 0.65, 0.08, 0.25};
constexpr Style kVerboseAdversarial{0.45, 0.10, 0.15, 0.30};
constexpr Style kTerseExpert{0.35, 0.03, 0.40, 0.22};
constexpr Style kTerseAdversarial{0.05, 0.55, 0.05, 0.35};
constexpr Style kVerboseKeyword{0.12, 0.33, 0.17, 0.38};
constexpr Style kTerseKeyword{0.19, 0.20, 0.23, 0.38};

const char* const kSteeredQuery = "q1";

std::vector<double> expand(const Vocabulary& vocab, const Style& s) {
  std::vector<double> p(vocab.size(), 0.0);
  p[static_cast<std::size_t>(vocab.id("<end>"))] = s[0];
  p[static_cast<std::size_t>(vocab.id("word"))] = s[1];
  p[static_cast<std::size_t>(vocab.id("please"))] = s[2];
  p[static_cast<std::size_t>(vocab.id("um"))] = s[3];
  return p;
}

// Every sequence over `alphabet` of length <= max_len.
std::vector<TokenSeq> all_prefixes(const TokenSeq& alphabet, int max_len) {
  std::vector<TokenSeq> out{{}};
  std::size_t begin = 0;
  for (int len = 1; len <= max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = begin; i < end; ++i) {
      for (TokenId t : alphabet) {
        TokenSeq next = out[i];
        next.push_back(t);
        out.push_back(std::move(next));
      }
    }
    begin = end;
  }
  return out;
}

// The last `n` tokens of `seq`.
TokenSeq tail(const TokenSeq& seq, std::size_t n) {
  return TokenSeq(seq.end() - static_cast<long>(std::min(n, seq.size())), seq.end());
}

}  // namespace

Vocabulary steering_vocab() {
  return Vocabulary({"<end>", "<unk>", "word", "please", "um", "q1", "q2", "q3", "verbose",
                     "terse-polite", "non-verbose", "non-terse-polite", "elaborate", "curt",
                     "courteous", "rambling"});
}

PromptLibrary steering_prompts() {
  PromptLibrary lib;
  lib.objectives.push_back(
      {"verbose", prompt_scaffold("verbose", "give long detailed answers and elaborate"),
       prompt_scaffold("non-verbose", "keep every answer short and curt")});
  lib.objectives.push_back(
      {"terse-polite", prompt_scaffold("terse-polite", "be brief and stay courteous"),
       prompt_scaffold("non-terse-polite", "go on at length without courtesy, rambling")});
  return lib;
}

ToyLmTable steering_table() {
  const Vocabulary vocab = steering_vocab();
  const auto prompts = steering_prompts();
  const auto& verbose = prompts.find("verbose");
  const auto& terse = prompts.find("terse-polite");

  // Each style is recognized by the prompt tokens just before the query.
  const std::vector<std::pair<TokenSeq, Style>> styles{
      {tail(vocab.encode(verbose.expert), 1), kVerboseExpert},
      {tail(vocab.encode(verbose.adversarial), 1), kVerboseAdversarial},
      {tail(vocab.encode(terse.expert), 1), kTerseExpert},
      {tail(vocab.encode(terse.adversarial), 1), kTerseAdversarial},
      {tail(vocab.encode(keyword_prompt_text("verbose")), 6), kVerboseKeyword},
      {tail(vocab.encode(keyword_prompt_text("terse-polite")), 6), kTerseKeyword},
  };
  std::size_t longest = 0;
  for (const auto& [marker, style] : styles) longest = std::max(longest, marker.size());

  const int max_prefix = kSteeringMaxTokens - 1;
  ToyLmTable table = ToyLmTable::empty(vocab, static_cast<int>(longest) + 1 + max_prefix);
  table.fallback = TokenDistribution::from_probs(expand(vocab, kPlain), vocab.fingerprint());
  const TokenId query = vocab.id(kSteeredQuery);
  const auto prefixes =
      all_prefixes({vocab.id("word"), vocab.id("please"), vocab.id("um")}, max_prefix);
  for (const auto& [marker, style] : styles) {
    const auto dist = TokenDistribution::from_probs(expand(vocab, style), vocab.fingerprint());
    for (const auto& prefix : prefixes) {
      TokenSeq key = marker;
      key.push_back(query);
      key.insert(key.end(), prefix.begin(), prefix.end());
      table.entries.insert_or_assign(std::move(key), dist);
    }
  }
  table.validate();
  return table;
}

LexicalRewardSpec verbose_reward() {
  return LexicalRewardSpec{"verbose", {{"word", 1.0}, {"um", -1.0}}, 0.2};
}

LexicalRewardSpec terse_polite_reward() {
  return LexicalRewardSpec{"terse-polite", {{"please", 1.0}, {"um", -1.0}}, -0.3};
}

RunConfig steering_config() {
  RunConfig c;
  c.backend.kind = BackendConfig::Kind::Toy;
  c.backend.table = "toy_lm.json";
  c.rewards = {RewardConfig{RewardConfig::Kind::Lexical, "reward_verbose.json", "", ""},
               RewardConfig{RewardConfig::Kind::Lexical, "reward_terse_polite.json", "", ""}};
  c.prompt_library = "prompts.json";
  c.augmenter = AugmenterConfig{AugmenterConfig::Kind::Scripted, "please", "um",
                                "prefer the response style of the chosen answers", ""};
  c.queries = {"q1", "q2", "q3"};
  c.gen.max_tokens = kSteeringMaxTokens;
  c.forge.num_forge_queries = 3;
  c.sweep.num_queries = 1;
  c.sweep.samples_per_cell = 20;
  c.sweep.seed = 7;
  c.sweep.compare_modes = {DecodeMode::Ensemble, DecodeMode::Keyword};
  c.output_dir = "out";
  return c;
}

std::filesystem::path write_steering_fixture(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  steering_table().save(dir / "toy_lm.json");
  verbose_reward().save(dir / "reward_verbose.json");
  terse_polite_reward().save(dir / "reward_terse_polite.json");
  steering_prompts().save(dir / "prompts.json");
  const auto config_path = dir / "config.json";
  steering_config().save(config_path);
  return config_path;
}

}  // namespace prefsteer::fixtures
