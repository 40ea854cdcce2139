#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "prefsteer/commands.hpp"

using namespace prefsteer;

namespace {

struct Overrides {
  std::optional<std::string> mode;
  std::optional<std::uint64_t> seed;
  std::optional<double> grid_step;
};

void apply(RunConfig& config, const Overrides& o) {
  if (o.mode) {
    try {
      config.mode = parse_decode_mode(*o.mode);
    } catch (const InvalidArgument& e) {
      throw ConfigError(e.what());
    }
  }
  if (o.seed) {
    config.gen.seed = *o.seed;
    config.sweep.seed = *o.seed;
  }
  if (o.grid_step) config.sweep.grid_step = *o.grid_step;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Preference-weighted contrastive decoding toolkit"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "Run configuration (JSON)")->required();

  Overrides ov;
  auto add_mode = [&](CLI::App* cmd) {
    cmd->add_option("--mode", ov.mode, "contrast|ensemble|keyword");
  };
  auto add_seed = [&](CLI::App* cmd) { cmd->add_option("--seed", ov.seed, "RNG seed"); };

  auto* forge = app.add_subcommand("forge", "Build expert/adversarial prompts from response pools");

  auto* gen = app.add_subcommand("generate", "Generate one response for a query");
  std::string query;
  std::optional<std::string> weights;
  std::optional<std::string> trace;
  gen->add_option("query", query, "Query text")->required();
  gen->add_option("--weights", weights, "Preference weights w1,w2,... (normalized to sum 1)");
  gen->add_option("--trace", trace, "Write per-step trace as JSON lines");
  add_mode(gen);
  add_seed(gen);

  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep the preference grid and write statistics");
  sweep_cmd->add_option("--grid-step", ov.grid_step, "Preference grid step");
  add_mode(sweep_cmd);
  add_seed(sweep_cmd);

  auto* stats_cmd = app.add_subcommand("stats", "Recompute statistics from a records file");
  std::string records;
  stats_cmd->add_option("records", records, "records.jsonl from a sweep")->required();
  add_mode(stats_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig config = RunConfig::load(config_path);
    apply(config, ov);
    if (forge->parsed()) return cmd_forge(config, std::cerr);
    if (gen->parsed()) {
      GenerateRequest req{query, std::nullopt, std::nullopt};
      if (weights) req.preference = Preference::make(parse_weights(*weights), true);
      if (trace) req.trace = *trace;
      return cmd_generate(config, req, std::cout);
    }
    if (sweep_cmd->parsed()) return cmd_sweep(config, std::cerr);
    if (stats_cmd->parsed()) return cmd_stats(config, records, std::cerr);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const SimplexViolation& e) {
    std::cerr << "invalid preference: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}
