#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "prefsteer/backend.hpp"
#include "prefsteer/core_model.hpp"
#include "prefsteer/decoder.hpp"
#include "prefsteer/eval.hpp"
#include "prefsteer/prompt_forge.hpp"

namespace prefsteer {

struct BackendConfig {
  enum class Kind { Toy, Remote };
  Kind kind = Kind::Toy;
  std::string table;     ///< toy: table JSON
  std::string endpoint;  ///< remote: host:port
  std::string vocab;     ///< remote: JSON array of token strings
  PromptComposition composition = PromptComposition::Replace;
  std::string base_system_prompt;

  bool operator==(const BackendConfig&) const = default;
};

struct RewardConfig {
  enum class Kind { Lexical, Remote };
  Kind kind = Kind::Lexical;
  std::string spec;       ///< lexical: spec JSON
  std::string objective;  ///< remote: objective id
  std::string endpoint;   ///< remote: host:port

  bool operator==(const RewardConfig&) const = default;
};

struct AugmenterConfig {
  enum class Kind { Scripted, Remote };
  Kind kind = Kind::Scripted;
  std::string high_append;
  std::string low_append;
  std::string instruction;
  std::string endpoint;

  bool operator==(const AugmenterConfig&) const = default;
};

struct ForgeConfig {
  std::size_t m = kDefaultPoolCapacity;
  std::size_t k = kDefaultInductionQueries;
  int max_iter = kDefaultMaxIterations;
  std::size_t count_per_side = kDefaultCountPerSide;
  /// Leading queries that enter prompt construction; 0 means all.
  std::size_t num_forge_queries = 0;
  bool joint_adversarial = false;
  std::uint64_t seed = 0;

  bool operator==(const ForgeConfig&) const = default;
};

struct SweepConfig {
  double grid_step = 0.1;
  std::size_t samples_per_cell = 20;
  std::uint64_t seed = 0;
  /// Leading queries used by the sweep; 0 means all.
  std::size_t num_queries = 0;
  /// Extra modes whose fronts are compared against the main mode.
  std::vector<DecodeMode> compare_modes;
  bool baseline = true;
  std::size_t threads = 0;
  std::size_t histogram_bins = 10;

  bool operator==(const SweepConfig&) const = default;
};

struct RunConfig {
  BackendConfig backend;
  std::vector<RewardConfig> rewards;
  std::string prompt_library = "prompts.json";
  AugmenterConfig augmenter;
  std::vector<std::string> queries;
  GenParams gen;
  ForgeConfig forge;
  SweepConfig sweep;
  DecodeMode mode = DecodeMode::Contrast;
  Combination combination = Combination::Arithmetic;
  std::string output_dir = "out";
  /// Relative paths resolve against this directory. Not serialized.
  std::filesystem::path base_dir;

  /// Throws ConfigError for missing or malformed fields.
  static RunConfig from_json(const nlohmann::json& j, std::filesystem::path base_dir = {});
  nlohmann::json to_json() const;
  /// base_dir becomes the file's directory.
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::filesystem::path resolve(const std::string& path) const;
  /// Throws ConfigError when referenced files are missing or values are out of range.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

std::string_view to_string(PromptComposition c);
PromptComposition parse_prompt_composition(std::string_view s);

}  // namespace prefsteer
