#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "prefsteer/config.hpp"

namespace prefsteer {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Backend, vocabulary and reward models built from a config.
struct Runtime {
  std::unique_ptr<LmBackend> backend;
  std::vector<std::unique_ptr<RewardModel>> rewards;

  const Vocabulary& vocab() const { return backend->vocab(); }
  std::vector<std::string> objective_ids() const;
  std::vector<const RewardModel*> reward_ptrs() const;
};

/// Validates the config, then loads every component. Remote components are not contacted.
Runtime build_runtime(const RunConfig& config);

/// Remote augmenters read the credential from MCA_API_KEY.
std::unique_ptr<AugmentationClient> build_augmenter(const RunConfig& config, const Vocabulary& vocab);

/// Objective prompt pairs from the prompt library, aligned with the reward order. Keyword
/// mode runs without a library.
std::vector<PromptPair> load_objectives(const RunConfig& config, const Runtime& runtime,
                                        DecodeMode mode);

/// Writes prompts.json, pools_<objective>.jsonl and dynamics.csv into the output directory.
/// Objectives that fail are skipped; returns kExitFailure if any did.
int cmd_forge(const RunConfig& config, std::ostream& log);

struct GenerateRequest {
  std::string query;
  /// Uniform when absent.
  std::optional<Preference> preference;
  std::optional<std::filesystem::path> trace;
};

/// Prints the decoded response followed by a newline.
int cmd_generate(const RunConfig& config, const GenerateRequest& request, std::ostream& out);

/// Writes records.jsonl plus the statistics files of write_stats into the output directory.
int cmd_sweep(const RunConfig& config, std::ostream& log);

/// Recomputes statistics from an existing records file.
int cmd_stats(const RunConfig& config, const std::filesystem::path& records, std::ostream& log);

/// means.csv, front.csv, stats.csv and histograms.csv for `records`. Fronts of other modes
/// are compared against `main_mode`; cells are tested against baseline records if present.
void write_stats(std::span<const SweepRecord> records, std::span<const std::string> objective_ids,
                 SweepMode main_mode, std::size_t histogram_bins, const std::filesystem::path& dir);

/// Shortest round-trip decimal form; "nan" for NaN.
std::string format_number(double x);

/// Parses "w1,w2,..." into raw weights. Throws ConfigError on malformed numbers.
std::vector<double> parse_weights(std::string_view text);

}  // namespace prefsteer
