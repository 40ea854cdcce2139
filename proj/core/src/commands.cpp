#include "prefsteer/commands.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "prefsteer/stats.hpp"

namespace prefsteer {

namespace fs = std::filesystem;

std::vector<std::string> Runtime::objective_ids() const {
  std::vector<std::string> ids;
  for (const auto& r : rewards) ids.push_back(r->objective_id());
  return ids;
}

std::vector<const RewardModel*> Runtime::reward_ptrs() const {
  std::vector<const RewardModel*> out;
  for (const auto& r : rewards) out.push_back(r.get());
  return out;
}

namespace {

Vocabulary load_vocab(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary " + path.string());
  try {
    return Vocabulary(nlohmann::json::parse(in).get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse vocabulary " + path.string() + ": " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("write failed for " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path prepare_output(const RunConfig& config) {
  const fs::path dir = config.resolve(config.output_dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<TokenSeq> encode_queries(const RunConfig& config, const Vocabulary& vocab,
                                     std::size_t limit) {
  if (config.queries.empty()) throw ConfigError("config lists no queries");
  const std::size_t n = limit == 0 ? config.queries.size() : std::min(limit, config.queries.size());
  std::vector<TokenSeq> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(vocab.encode(config.queries[i]));
  return out;
}

std::string join_numbers(std::span<const double> xs, char sep) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += sep;
    out += format_number(xs[i]);
  }
  return out;
}

}  // namespace

std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::vector<double> parse_weights(std::string_view text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = text.find(',', pos);
    std::string_view piece = text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos);
    while (!piece.empty() && piece.front() == ' ') piece.remove_prefix(1);
    while (!piece.empty() && piece.back() == ' ') piece.remove_suffix(1);
    double v = 0.0;
    const auto res = std::from_chars(piece.data(), piece.data() + piece.size(), v);
    if (piece.empty() || res.ec != std::errc() || res.ptr != piece.data() + piece.size()) {
      throw ConfigError("cannot parse weight '" + std::string(piece) + "'");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

Runtime build_runtime(const RunConfig& config) {
  config.validate();
  Runtime rt;
  const auto& b = config.backend;
  if (b.kind == BackendConfig::Kind::Toy) {
    auto table = ToyLmTable::load(config.resolve(b.table));
    ContextAssembly assembly{b.composition, table.vocab.encode(b.base_system_prompt)};
    rt.backend = std::make_unique<ToyLm>(std::move(table), std::move(assembly));
  } else {
    auto vocab = load_vocab(config.resolve(b.vocab));
    ContextAssembly assembly{b.composition, vocab.encode(b.base_system_prompt)};
    rt.backend = std::make_unique<RemoteLm>(Endpoint::parse(b.endpoint), std::move(vocab),
                                            std::move(assembly));
  }
  for (const auto& r : config.rewards) {
    if (r.kind == RewardConfig::Kind::Lexical) {
      const auto spec = LexicalRewardSpec::load(config.resolve(r.spec));
      rt.rewards.push_back(std::make_unique<LexicalReward>(spec, rt.vocab()));
    } else {
      rt.rewards.push_back(std::make_unique<RemoteReward>(r.objective, Endpoint::parse(r.endpoint)));
    }
  }
  const auto ids = rt.objective_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (ids[i] == ids[j]) throw ConfigError("objective '" + ids[i] + "' has two reward models");
    }
  }
  return rt;
}

std::unique_ptr<AugmentationClient> build_augmenter(const RunConfig& config,
                                                    const Vocabulary& vocab) {
  const auto& a = config.augmenter;
  if (a.kind == AugmenterConfig::Kind::Scripted) {
    return std::make_unique<ScriptedAugmenter>(vocab.encode(a.high_append),
                                               vocab.encode(a.low_append), a.instruction);
  }
  if (a.endpoint.empty()) throw ConfigError("remote augmenter needs an endpoint");
  std::optional<std::string> auth;
  if (const char* key = std::getenv("MCA_API_KEY")) auth = key;
  return std::make_unique<RemoteAugmenter>(Endpoint::parse(a.endpoint), vocab, std::move(auth));
}

std::vector<PromptPair> load_objectives(const RunConfig& config, const Runtime& runtime,
                                        DecodeMode mode) {
  const auto ids = runtime.objective_ids();
  const fs::path path = config.resolve(config.prompt_library);
  if (mode == DecodeMode::Keyword && !fs::exists(path)) {
    std::vector<PromptPair> out;
    for (const auto& id : ids) out.push_back(PromptPair::make(id, {}, {}, true));
    return out;
  }
  return PromptLibrary::load(path).pairs(runtime.vocab(), ids);
}

int cmd_forge(const RunConfig& config, std::ostream& log) {
  Runtime rt = build_runtime(config);
  auto client = build_augmenter(config, rt.vocab());
  const fs::path dir = prepare_output(config);
  const auto queries = encode_queries(config, rt.vocab(), config.forge.num_forge_queries);
  const auto& f = config.forge;

  std::ostringstream dynamics;
  dynamics << "objective,query_id,iteration,max_reward,min_reward,reward_range,max_length,"
              "min_length,length_reward_rho\n";
  std::vector<InducedPrompts> induced;
  bool failed = false;
  for (std::size_t o = 0; o < rt.rewards.size(); ++o) {
    const RewardModel& reward = *rt.rewards[o];
    const std::string& id = reward.objective_id();
    try {
      std::vector<ResponsePool> pools;
      std::string snapshots;
      for (std::size_t q = 0; q < queries.size(); ++q) {
        auto pool = init_pool("q" + std::to_string(q + 1), queries[q], f.m, *rt.backend, reward,
                              config.gen, derive_seed(derive_seed(f.seed, o), q));
        snapshots += pool_to_jsonl(pool, rt.vocab());
        auto result = run_iterations(std::move(pool), *client, reward, rt.vocab(), f.max_iter,
                                     f.count_per_side);
        for (const auto& s : result.dynamics) {
          dynamics << id << ',' << result.pool.query_id << ',' << s.iteration << ','
                   << format_number(s.max_reward) << ',' << format_number(s.min_reward) << ','
                   << format_number(s.reward_range) << ',' << s.max_length << ',' << s.min_length
                   << ',' << format_number(s.length_reward_rho) << '\n';
        }
        if (result.error) throw AugmentationFailed(*result.error);
        if (result.pool.iteration > 0) snapshots += pool_to_jsonl(result.pool, rt.vocab());
        pools.push_back(std::move(result.pool));
      }
      write_file(dir / ("pools_" + id + ".jsonl"), snapshots);
      const auto selected = select_queries(pools, f.k);
      auto prompts = induce_prompts(selected, *client, rt.vocab(), id);
      if (rt.vocab().encode(prompts.expert_text) == rt.vocab().encode(prompts.adversarial_text)) {
        throw InductionFailed("expert and adversarial prompts for '" + id +
                              "' are identical after tokenization");
      }
      induced.push_back(std::move(prompts));
      log << "forged prompts for " << id << '\n';
    } catch (const Error& e) {
      failed = true;
      log << "error: objective " << id << ": " << e.what() << '\n';
    }
  }
  write_file(dir / "dynamics.csv", dynamics.str());

  PromptLibrary library;
  const std::string joint = f.joint_adversarial && !induced.empty()
                                ? joint_adversarial_text(induced)
                                : std::string();
  for (const auto& p : induced) {
    library.objectives.push_back(
        {p.objective_id, p.expert_text, f.joint_adversarial ? joint : p.adversarial_text});
  }
  library.save(dir / "prompts.json");
  log << "wrote " << (dir / "prompts.json").string() << " (" << library.objectives.size() << " of "
      << rt.rewards.size() << " objectives)\n";
  return failed ? kExitFailure : kExitOk;
}

int cmd_generate(const RunConfig& config, const GenerateRequest& request, std::ostream& out) {
  Runtime rt = build_runtime(config);
  auto pairs = load_objectives(config, rt, config.mode);
  const Preference pref = request.preference ? *request.preference : Preference::uniform(pairs.size());
  const auto objectives = ObjectiveSet::make(std::move(pairs), pref);
  const TokenSeq query = rt.vocab().encode(request.query);
  const GenerateOptions options{config.mode, config.combination, request.trace.has_value()};
  const auto gen = generate(*rt.backend, objectives, query, config.gen, options);
  if (request.trace) write_file(*request.trace, trace_to_jsonl(gen.trace));
  out << rt.vocab().decode(gen.tokens) << '\n';
  return kExitOk;
}

int cmd_sweep(const RunConfig& config, std::ostream& log) {
  Runtime rt = build_runtime(config);
  const fs::path dir = prepare_output(config);
  const auto& s = config.sweep;
  const auto queries = encode_queries(config, rt.vocab(), s.num_queries);
  const auto rewards = rt.reward_ptrs();
  const auto grid = preference_grid(rt.rewards.size(), s.grid_step);

  std::vector<DecodeMode> modes{config.mode};
  for (auto m : s.compare_modes) {
    if (std::find(modes.begin(), modes.end(), m) == modes.end()) modes.push_back(m);
  }
  std::vector<SweepRecord> records;
  auto run = [&](SweepMode mode, const ObjectiveSet& objectives) {
    SweepOptions opts{mode, config.combination, config.gen, s.samples_per_cell, s.seed, s.threads};
    auto batch = sweep(*rt.backend, objectives, rewards, queries, grid, opts);
    log << "sweep " << to_string(mode) << ": " << batch.size() << " records\n";
    records.insert(records.end(), batch.begin(), batch.end());
  };
  for (auto m : modes) {
    run(sweep_mode(m),
        ObjectiveSet::make(load_objectives(config, rt, m), Preference::uniform(rt.rewards.size())));
  }
  if (s.baseline) {
    auto pairs = load_objectives(config, rt, DecodeMode::Keyword);
    run(SweepMode::Baseline, ObjectiveSet::make(std::move(pairs), Preference::uniform(rt.rewards.size())));
  }
  write_file(dir / "records.jsonl", records_to_jsonl(records));
  write_stats(records, rt.objective_ids(), sweep_mode(config.mode), s.histogram_bins, dir);
  log << "wrote " << (dir / "records.jsonl").string() << '\n';
  return kExitOk;
}

int cmd_stats(const RunConfig& config, const fs::path& records_path, std::ostream& log) {
  const auto records = records_from_jsonl(read_file(records_path));
  if (records.empty()) throw ConfigError("records file is empty: " + records_path.string());
  std::vector<std::string> ids;
  for (const auto& r : config.rewards) {
    if (r.kind == RewardConfig::Kind::Remote) {
      ids.push_back(r.objective);
    } else {
      ids.push_back(LexicalRewardSpec::load(config.resolve(r.spec)).objective);
    }
  }
  const std::size_t n = records.front().rewards.size();
  if (ids.size() != n) {
    ids.clear();
    for (std::size_t i = 0; i < n; ++i) ids.push_back("r" + std::to_string(i));
  }
  const fs::path dir = prepare_output(config);
  write_stats(records, ids, sweep_mode(config.mode), config.sweep.histogram_bins, dir);
  log << "wrote statistics for " << records.size() << " records to " << dir.string() << '\n';
  return kExitOk;
}

void write_stats(std::span<const SweepRecord> records, std::span<const std::string> ids,
                 SweepMode main_mode, std::size_t bins, const fs::path& dir) {
  std::vector<SweepMode> modes;
  std::map<SweepMode, std::vector<SweepRecord>> by_mode;
  for (const auto& r : records) {
    if (r.rewards.size() != ids.size()) throw InvalidArgument("record has the wrong reward count");
    if (!by_mode.count(r.mode)) modes.push_back(r.mode);
    by_mode[r.mode].push_back(r);
  }

  std::string header;
  for (const auto& id : ids) header += ",w_" + id;
  for (const auto& id : ids) header += "," + id;
  std::ostringstream means_csv, front_csv, stats_csv, hist_csv;
  means_csv << "mode" << header << '\n';
  front_csv << "mode" << header << '\n';
  stats_csv << "kind,mode,a,b,value,p\n";
  hist_csv << "mode,objective,bin,lo,hi,count\n";

  auto point_row = [&](std::ostringstream& os, SweepMode m, const FrontPoint& p) {
    os << to_string(m);
    for (std::size_t i = 0; i < ids.size(); ++i) {
      os << ',' << (i < p.preference.size() ? format_number(p.preference[i]) : std::string());
    }
    for (double v : p.means) os << ',' << format_number(v);
    os << '\n';
  };

  std::map<SweepMode, std::vector<FrontPoint>> fronts;
  for (auto m : modes) {
    const auto& recs = by_mode[m];
    const auto means = mean_rewards(recs);
    for (const auto& p : means) point_row(means_csv, m, p);
    if (m != SweepMode::Baseline) {
      fronts[m] = pareto_front(means);
      for (const auto& p : fronts[m]) point_row(front_csv, m, p);
      stats_csv << "front_size," << to_string(m) << ",,," << fronts[m].size() << ",\n";
    }

    std::vector<std::vector<double>> columns(ids.size());
    for (const auto& r : recs) {
      for (std::size_t i = 0; i < ids.size(); ++i) columns[i].push_back(r.rewards[i]);
    }
    if (recs.size() >= 2) {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
          stats_csv << "spearman_rewards," << to_string(m) << ',' << ids[i] << ',' << ids[j] << ','
                    << format_number(spearman_rho(columns[i], columns[j])) << ",\n";
        }
      }
    }
    if (m != SweepMode::Baseline && means.size() >= 2) {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        std::vector<double> w, v;
        for (const auto& p : means) {
          w.push_back(p.preference[i]);
          v.push_back(p.means[i]);
        }
        stats_csv << "spearman_weight," << to_string(m) << ",w_" << ids[i] << ',' << ids[i] << ','
                  << format_number(spearman_rho(w, v)) << ",\n";
      }
    }
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const auto h = reward_histogram(columns[i], bins);
      for (std::size_t b = 0; b < h.counts.size(); ++b) {
        hist_csv << to_string(m) << ',' << ids[i] << ',' << b << ',' << format_number(h.edges[b])
                 << ',' << format_number(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
      }
    }
  }

  if (fronts.count(main_mode)) {
    for (auto m : modes) {
      if (m == main_mode || !fronts.count(m)) continue;
      stats_csv << "front_dominates," << to_string(main_mode) << ',' << to_string(m) << ",,"
                << format_number(front_dominates(fronts[main_mode], fronts[m])) << ",\n";
    }
  }

  if (by_mode.count(SweepMode::Baseline) && by_mode.count(main_mode)) {
    const auto& base = by_mode[SweepMode::Baseline];
    std::map<std::vector<double>, std::vector<const SweepRecord*>> cells;
    std::vector<std::vector<double>> order;
    for (const auto& r : by_mode[main_mode]) {
      if (!cells.count(r.preference)) order.push_back(r.preference);
      cells[r.preference].push_back(&r);
    }
    for (const auto& pref : order) {
      for (std::size_t i = 0; i < ids.size(); ++i) {
        std::vector<double> a, b;
        for (const auto* r : cells[pref]) a.push_back(r->rewards[i]);
        for (const auto& r : base) b.push_back(r.rewards[i]);
        std::string value = "nan", p = "nan";
        if (a.size() >= 2 && b.size() >= 2) {
          try {
            const auto res = welch_t_test(a, b);
            value = format_number(res.t);
            p = format_number(res.p);
          } catch (const DegenerateSample&) {
          }
        }
        stats_csv << "welch_vs_baseline," << to_string(main_mode) << ',' << join_numbers(pref, ';')
                  << ',' << ids[i] << ',' << value << ',' << p << '\n';
      }
    }
  }

  write_file(dir / "means.csv", means_csv.str());
  write_file(dir / "front.csv", front_csv.str());
  write_file(dir / "stats.csv", stats_csv.str());
  write_file(dir / "histograms.csv", hist_csv.str());
}

}  // namespace prefsteer
