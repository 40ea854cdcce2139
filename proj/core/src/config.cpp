#include "prefsteer/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

namespace prefsteer {

using nlohmann::json;

std::string_view to_string(PromptComposition c) {
  return c == PromptComposition::Accompany ? "accompany" : "replace";
}

PromptComposition parse_prompt_composition(std::string_view s) {
  if (s == "replace") return PromptComposition::Replace;
  if (s == "accompany") return PromptComposition::Accompany;
  throw ConfigError("unknown prompt composition '" + std::string(s) + "' (expected replace|accompany)");
}

namespace {

void check_keys(const json& j, const char* where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(where) + " must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) throw ConfigError(std::string("unknown key '") + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

BackendConfig backend_from_json(const json& j) {
  check_keys(j, "backend", {"kind", "table", "endpoint", "vocab", "composition", "base_system_prompt"});
  BackendConfig b;
  const auto kind = j.value("kind", std::string("toy"));
  if (kind == "toy") {
    b.kind = BackendConfig::Kind::Toy;
  } else if (kind == "remote") {
    b.kind = BackendConfig::Kind::Remote;
  } else {
    throw ConfigError("unknown backend kind '" + kind + "'");
  }
  read(j, "table", b.table);
  read(j, "endpoint", b.endpoint);
  read(j, "vocab", b.vocab);
  if (auto it = j.find("composition"); it != j.end()) {
    b.composition = parse_prompt_composition(it->get<std::string>());
  }
  read(j, "base_system_prompt", b.base_system_prompt);
  return b;
}

json backend_to_json(const BackendConfig& b) {
  return {{"kind", b.kind == BackendConfig::Kind::Toy ? "toy" : "remote"},
          {"table", b.table},
          {"endpoint", b.endpoint},
          {"vocab", b.vocab},
          {"composition", to_string(b.composition)},
          {"base_system_prompt", b.base_system_prompt}};
}

RewardConfig reward_from_json(const json& j) {
  check_keys(j, "rewards[]", {"kind", "spec", "objective", "endpoint"});
  RewardConfig r;
  const auto kind = j.value("kind", std::string("lexical"));
  if (kind == "lexical") {
    r.kind = RewardConfig::Kind::Lexical;
  } else if (kind == "remote") {
    r.kind = RewardConfig::Kind::Remote;
  } else {
    throw ConfigError("unknown reward kind '" + kind + "'");
  }
  read(j, "spec", r.spec);
  read(j, "objective", r.objective);
  read(j, "endpoint", r.endpoint);
  return r;
}

json reward_to_json(const RewardConfig& r) {
  return {{"kind", r.kind == RewardConfig::Kind::Lexical ? "lexical" : "remote"},
          {"spec", r.spec},
          {"objective", r.objective},
          {"endpoint", r.endpoint}};
}

AugmenterConfig augmenter_from_json(const json& j) {
  check_keys(j, "augmenter", {"kind", "high_append", "low_append", "instruction", "endpoint"});
  AugmenterConfig a;
  const auto kind = j.value("kind", std::string("scripted"));
  if (kind == "scripted") {
    a.kind = AugmenterConfig::Kind::Scripted;
  } else if (kind == "remote") {
    a.kind = AugmenterConfig::Kind::Remote;
  } else {
    throw ConfigError("unknown augmenter kind '" + kind + "'");
  }
  read(j, "high_append", a.high_append);
  read(j, "low_append", a.low_append);
  read(j, "instruction", a.instruction);
  read(j, "endpoint", a.endpoint);
  return a;
}

json augmenter_to_json(const AugmenterConfig& a) {
  return {{"kind", a.kind == AugmenterConfig::Kind::Scripted ? "scripted" : "remote"},
          {"high_append", a.high_append},
          {"low_append", a.low_append},
          {"instruction", a.instruction},
          {"endpoint", a.endpoint}};
}

GenParams gen_from_json(const json& j) {
  check_keys(j, "gen", {"nucleus_p", "temperature", "max_tokens", "alpha", "seed", "greedy"});
  GenParams g;
  read(j, "nucleus_p", g.nucleus_p);
  read(j, "temperature", g.temperature);
  read(j, "max_tokens", g.max_tokens);
  read(j, "alpha", g.alpha);
  read(j, "seed", g.seed);
  read(j, "greedy", g.greedy);
  return g;
}

json gen_to_json(const GenParams& g) {
  return {{"nucleus_p", g.nucleus_p}, {"temperature", g.temperature}, {"max_tokens", g.max_tokens},
          {"alpha", g.alpha},         {"seed", g.seed},               {"greedy", g.greedy}};
}

ForgeConfig forge_from_json(const json& j) {
  check_keys(j, "forge",
             {"m", "k", "max_iter", "count_per_side", "num_forge_queries", "joint_adversarial", "seed"});
  ForgeConfig f;
  read(j, "m", f.m);
  read(j, "k", f.k);
  read(j, "max_iter", f.max_iter);
  read(j, "count_per_side", f.count_per_side);
  read(j, "num_forge_queries", f.num_forge_queries);
  read(j, "joint_adversarial", f.joint_adversarial);
  read(j, "seed", f.seed);
  return f;
}

json forge_to_json(const ForgeConfig& f) {
  return {{"m", f.m},
          {"k", f.k},
          {"max_iter", f.max_iter},
          {"count_per_side", f.count_per_side},
          {"num_forge_queries", f.num_forge_queries},
          {"joint_adversarial", f.joint_adversarial},
          {"seed", f.seed}};
}

SweepConfig sweep_from_json(const json& j) {
  check_keys(j, "sweep",
             {"grid_step", "samples_per_cell", "seed", "num_queries", "compare_modes", "baseline",
              "threads", "histogram_bins"});
  SweepConfig s;
  read(j, "grid_step", s.grid_step);
  read(j, "samples_per_cell", s.samples_per_cell);
  read(j, "seed", s.seed);
  read(j, "num_queries", s.num_queries);
  if (auto it = j.find("compare_modes"); it != j.end()) {
    for (const auto& m : *it) s.compare_modes.push_back(parse_decode_mode(m.get<std::string>()));
  }
  read(j, "baseline", s.baseline);
  read(j, "threads", s.threads);
  read(j, "histogram_bins", s.histogram_bins);
  return s;
}

json sweep_to_json(const SweepConfig& s) {
  json modes = json::array();
  for (auto m : s.compare_modes) modes.push_back(to_string(m));
  return {{"grid_step", s.grid_step},
          {"samples_per_cell", s.samples_per_cell},
          {"seed", s.seed},
          {"num_queries", s.num_queries},
          {"compare_modes", std::move(modes)},
          {"baseline", s.baseline},
          {"threads", s.threads},
          {"histogram_bins", s.histogram_bins}};
}

}  // namespace

RunConfig RunConfig::from_json(const json& j, std::filesystem::path base_dir) {
  RunConfig c;
  c.base_dir = std::move(base_dir);
  try {
    check_keys(j, "config",
               {"backend", "rewards", "prompt_library", "augmenter", "queries", "gen", "forge",
                "sweep", "mode", "combination", "output_dir"});
    if (auto it = j.find("backend"); it != j.end()) c.backend = backend_from_json(*it);
    if (auto it = j.find("rewards"); it != j.end()) {
      for (const auto& r : *it) c.rewards.push_back(reward_from_json(r));
    }
    read(j, "prompt_library", c.prompt_library);
    if (auto it = j.find("augmenter"); it != j.end()) c.augmenter = augmenter_from_json(*it);
    read(j, "queries", c.queries);
    if (auto it = j.find("gen"); it != j.end()) c.gen = gen_from_json(*it);
    if (auto it = j.find("forge"); it != j.end()) c.forge = forge_from_json(*it);
    if (auto it = j.find("sweep"); it != j.end()) c.sweep = sweep_from_json(*it);
    if (auto it = j.find("mode"); it != j.end()) c.mode = parse_decode_mode(it->get<std::string>());
    if (auto it = j.find("combination"); it != j.end()) {
      c.combination = parse_combination(it->get<std::string>());
    }
    read(j, "output_dir", c.output_dir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(e.what());
  }
  return c;
}

json RunConfig::to_json() const {
  json rewards_json = json::array();
  for (const auto& r : rewards) rewards_json.push_back(reward_to_json(r));
  return {{"backend", backend_to_json(backend)},
          {"rewards", std::move(rewards_json)},
          {"prompt_library", prompt_library},
          {"augmenter", augmenter_to_json(augmenter)},
          {"queries", queries},
          {"gen", gen_to_json(gen)},
          {"forge", forge_to_json(forge)},
          {"sweep", sweep_to_json(sweep)},
          {"mode", to_string(mode)},
          {"combination", to_string(combination)},
          {"output_dir", output_dir}};
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return from_json(j, path.parent_path());
}

void RunConfig::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json().dump(2) << '\n';
}

std::filesystem::path RunConfig::resolve(const std::string& path) const {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p;
  return base_dir / p;
}

void RunConfig::validate() const {
  auto require_file = [&](const std::string& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " path is not set");
    if (!std::filesystem::exists(resolve(path))) {
      throw ConfigError(what + " not found: " + resolve(path).string());
    }
  };
  if (backend.kind == BackendConfig::Kind::Toy) {
    require_file(backend.table, "toy LM table");
  } else {
    if (backend.endpoint.empty()) throw ConfigError("remote backend needs an endpoint");
    require_file(backend.vocab, "vocabulary");
  }
  if (rewards.empty()) throw ConfigError("config lists no reward models");
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    const auto& r = rewards[i];
    if (r.kind == RewardConfig::Kind::Lexical) {
      require_file(r.spec, "reward spec " + std::to_string(i));
    } else if (r.objective.empty() || r.endpoint.empty()) {
      throw ConfigError("remote reward " + std::to_string(i) + " needs objective and endpoint");
    }
  }
  try {
    gen.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("gen: ") + e.what());
  }
  if (forge.m < 2 || forge.m % 2 != 0) throw ConfigError("forge.m must be even and at least 2");
  if (forge.k == 0) throw ConfigError("forge.k must be positive");
  if (forge.max_iter < 1) throw ConfigError("forge.max_iter must be at least 1");
  try {
    preference_grid(1, sweep.grid_step);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("sweep.grid_step: ") + e.what());
  }
  if (sweep.samples_per_cell == 0) throw ConfigError("sweep.samples_per_cell must be positive");
  if (sweep.histogram_bins == 0) throw ConfigError("sweep.histogram_bins must be positive");
}

}  // namespace prefsteer
