#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "prefsteer/backend.hpp"
#include "prefsteer/core_model.hpp"
#include "prefsteer/decoder.hpp"
#include "prefsteer/reward.hpp"

namespace prefsteer {

enum class SweepMode { Contrast, Ensemble, Keyword, Baseline };
std::string_view to_string(SweepMode m);
SweepMode parse_sweep_mode(std::string_view s);
SweepMode sweep_mode(DecodeMode m);

struct SweepRecord {
  SweepMode mode = SweepMode::Contrast;
  /// Preference weights of the cell; empty for baseline records.
  std::vector<double> preference;
  std::size_t query_index = 0;
  std::size_t sample_id = 0;
  TokenSeq response;
  std::vector<double> rewards;

  bool operator==(const SweepRecord&) const = default;
};

struct FrontPoint {
  std::vector<double> preference;
  std::vector<double> means;

  bool operator==(const FrontPoint&) const = default;
};

/// Every simplex point whose coordinates are multiples of `step`, ordered
/// lexicographically by coordinates ascending. n = 2, step = 0.1 gives 11 points.
/// Throws InvalidArgument unless 1/step is (numerically) an integer.
std::vector<Preference> preference_grid(std::size_t n, double step = 0.1);

struct SweepOptions {
  SweepMode mode = SweepMode::Contrast;
  Combination combination = Combination::Arithmetic;
  GenParams params;
  std::size_t samples_per_cell = 20;
  std::uint64_t seed = 0;
  /// 0 picks std::thread::hardware_concurrency().
  std::size_t threads = 0;
};

/// Seed of one (cell, query, sample) sequence.
std::uint64_t sweep_seed(std::uint64_t seed, std::size_t cell, std::size_t query,
                         std::size_t sample);

/// Generates and scores every (preference, query, sample) combination. `rewards[i]` scores
/// objective i. Records come back in (cell, query, sample) order regardless of threading.
/// A baseline sweep ignores the grid and samples plain completions once per (query, sample).
/// Failures are rethrown with the failing sequence index in the message.
std::vector<SweepRecord> sweep(const LmBackend& backend, const ObjectiveSet& objectives,
                               std::span<const RewardModel* const> rewards,
                               std::span<const TokenSeq> queries,
                               std::span<const Preference> grid, const SweepOptions& options);

/// Per-group means; empty groups are skipped with a warning on stderr.
std::vector<FrontPoint> mean_rewards(std::span<const std::vector<SweepRecord>> groups);
/// Groups `records` by preference (first-appearance order) and averages each group.
std::vector<FrontPoint> mean_rewards(std::span<const SweepRecord> records);

/// Non-dominated points under maximization, duplicates removed first, sorted by the first
/// objective descending.
std::vector<FrontPoint> pareto_front(std::span<const FrontPoint> points);

/// a >= b componentwise and a > b in some component.
bool dominates(std::span<const double> a, std::span<const double> b);

/// Fraction of points in `b` that some point of `a` matches or beats in every objective.
/// Throws InvalidArgument when either front is empty.
double front_dominates(std::span<const FrontPoint> a, std::span<const FrontPoint> b);

/// (v - min) / (max - min); every value maps to 0.5 when max = min.
std::vector<double> normalize_unit(std::span<const double> values);

struct Histogram {
  std::vector<double> edges;  ///< bins + 1 edges
  std::vector<std::size_t> counts;
};

/// Equal-width bins over [min, max]; the maximum falls in the last bin.
Histogram reward_histogram(std::span<const double> values, std::size_t bins);
Histogram reward_histogram(std::span<const SweepRecord> records, std::size_t objective,
                           std::size_t bins);

std::string records_to_jsonl(std::span<const SweepRecord> records);
/// Throws InvalidArgument on malformed lines, naming the line number.
std::vector<SweepRecord> records_from_jsonl(std::string_view text);

}  // namespace prefsteer
