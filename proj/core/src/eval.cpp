#include "prefsteer/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <iostream>
#include <map>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "prefsteer/sampling.hpp"

namespace prefsteer {

std::string_view to_string(SweepMode m) {
  switch (m) {
    case SweepMode::Contrast: return "contrast";
    case SweepMode::Ensemble: return "ensemble";
    case SweepMode::Keyword: return "keyword";
    case SweepMode::Baseline: return "baseline";
  }
  return "contrast";
}

SweepMode parse_sweep_mode(std::string_view s) {
  if (s == "baseline") return SweepMode::Baseline;
  return sweep_mode(parse_decode_mode(s));
}

SweepMode sweep_mode(DecodeMode m) {
  switch (m) {
    case DecodeMode::Contrast: return SweepMode::Contrast;
    case DecodeMode::Ensemble: return SweepMode::Ensemble;
    case DecodeMode::Keyword: return SweepMode::Keyword;
  }
  return SweepMode::Contrast;
}

namespace {

DecodeMode decode_mode(SweepMode m) {
  switch (m) {
    case SweepMode::Ensemble: return DecodeMode::Ensemble;
    case SweepMode::Keyword: return DecodeMode::Keyword;
    default: return DecodeMode::Contrast;
  }
}

void grid_rec(std::size_t n, int remaining, std::vector<int>& counts, int steps,
              std::vector<Preference>& out) {
  if (counts.size() + 1 == n) {
    counts.push_back(remaining);
    std::vector<double> w;
    for (int c : counts) w.push_back(static_cast<double>(c) / steps);
    out.push_back(Preference::make(w));
    counts.pop_back();
    return;
  }
  for (int c = 0; c <= remaining; ++c) {
    counts.push_back(c);
    grid_rec(n, remaining - c, counts, steps, out);
    counts.pop_back();
  }
}

}  // namespace

std::vector<Preference> preference_grid(std::size_t n, double step) {
  if (n == 0) throw InvalidArgument("preference grid needs at least one objective");
  if (!(step > 0.0 && step <= 1.0)) throw InvalidArgument("grid step must be in (0, 1]");
  const double inv = 1.0 / step;
  const long steps = std::lround(inv);
  if (std::abs(inv - static_cast<double>(steps)) > 1e-9) {
    throw InvalidArgument("grid step must divide 1 evenly");
  }
  std::vector<Preference> out;
  std::vector<int> counts;
  grid_rec(n, static_cast<int>(steps), counts, static_cast<int>(steps), out);
  return out;
}

std::uint64_t sweep_seed(std::uint64_t seed, std::size_t cell, std::size_t query,
                         std::size_t sample) {
  return derive_seed(derive_seed(derive_seed(seed, cell), query), sample);
}

std::vector<SweepRecord> sweep(const LmBackend& backend, const ObjectiveSet& objectives,
                               std::span<const RewardModel* const> rewards,
                               std::span<const TokenSeq> queries,
                               std::span<const Preference> grid, const SweepOptions& options) {
  const bool baseline = options.mode == SweepMode::Baseline;
  if (grid.empty() && !baseline) throw InvalidArgument("sweep grid is empty");
  if (rewards.size() != objectives.size()) {
    throw InvalidArgument("sweep needs one reward model per objective");
  }
  options.params.validate();

  const std::size_t cells = baseline ? 1 : grid.size();
  const std::size_t per_cell = queries.size() * options.samples_per_cell;
  const std::size_t total = cells * per_cell;
  std::vector<SweepRecord> records(total);

  std::vector<ObjectiveSet> cell_objectives;
  if (!baseline) {
    for (const auto& w : grid) cell_objectives.push_back(objectives.with_preference(w));
  }
  const GenerateOptions gen_options{decode_mode(options.mode), options.combination, false};

  auto run_one = [&](std::size_t idx) {
    const std::size_t cell = idx / per_cell;
    const std::size_t q = (idx % per_cell) / options.samples_per_cell;
    const std::size_t s = idx % options.samples_per_cell;
    GenParams params = options.params;
    params.seed = sweep_seed(options.seed, cell, q, s);
    SweepRecord& r = records[idx];
    r.mode = options.mode;
    r.query_index = q;
    r.sample_id = s;
    if (baseline) {
      r.response = complete(backend, DialogueContext{queries[q], {}, std::nullopt}, params, params.seed);
    } else {
      const auto w = grid[cell].weights();
      r.preference.assign(w.begin(), w.end());
      r.response = generate(backend, cell_objectives[cell], queries[q], params, gen_options).tokens;
    }
    r.rewards.reserve(rewards.size());
    for (const auto* model : rewards) r.rewards.push_back(model->score(queries[q], r.response));
  };

  std::size_t threads = options.threads ? options.threads : std::thread::hardware_concurrency();
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(total, 1));
  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::size_t failed_index = total;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t idx = next++; idx < total; idx = next++) {
      try {
        run_one(idx);
      } catch (...) {
        std::lock_guard lock(mu);
        if (idx < failed_index) {
          failed_index = idx;
          failure = std::current_exception();
        }
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (...) {
      rethrow_with_index("sweep sequence", failed_index);
    }
  }
  return records;
}

std::vector<FrontPoint> mean_rewards(std::span<const std::vector<SweepRecord>> groups) {
  std::vector<FrontPoint> out;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto& group = groups[g];
    if (group.empty()) {
      std::cerr << "warning: skipping empty record group " << g << '\n';
      continue;
    }
    FrontPoint p;
    p.preference = group.front().preference;
    p.means.assign(group.front().rewards.size(), 0.0);
    for (const auto& r : group) {
      if (r.rewards.size() != p.means.size()) {
        throw InvalidArgument("records in one group have different objective counts");
      }
      for (std::size_t i = 0; i < p.means.size(); ++i) p.means[i] += r.rewards[i];
    }
    for (double& m : p.means) m /= static_cast<double>(group.size());
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<FrontPoint> mean_rewards(std::span<const SweepRecord> records) {
  std::map<std::vector<double>, std::size_t> index;
  std::vector<std::vector<SweepRecord>> groups;
  for (const auto& r : records) {
    auto [it, inserted] = index.try_emplace(r.preference, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(r);
  }
  return mean_rewards(std::span<const std::vector<SweepRecord>>(groups));
}

bool dominates(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidArgument("points have different dimensions");
  bool strictly = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] < b[i]) return false;
    if (a[i] > b[i]) strictly = true;
  }
  return strictly;
}

std::vector<FrontPoint> pareto_front(std::span<const FrontPoint> points) {
  std::vector<FrontPoint> unique;
  for (const auto& p : points) {
    for (double m : p.means) {
      if (!std::isfinite(m)) throw NumericError("pareto_front: non-finite mean reward");
    }
    const bool seen = std::any_of(unique.begin(), unique.end(),
                                  [&](const FrontPoint& q) { return q.means == p.means; });
    if (!seen) unique.push_back(p);
  }
  std::vector<FrontPoint> front;
  for (const auto& p : unique) {
    const bool dominated = std::any_of(unique.begin(), unique.end(), [&](const FrontPoint& q) {
      return dominates(q.means, p.means);
    });
    if (!dominated) front.push_back(p);
  }
  std::stable_sort(front.begin(), front.end(), [](const FrontPoint& a, const FrontPoint& b) {
    return a.means.front() > b.means.front();
  });
  return front;
}

double front_dominates(std::span<const FrontPoint> a, std::span<const FrontPoint> b) {
  if (a.empty() || b.empty()) throw InvalidArgument("front_dominates needs non-empty fronts");
  std::size_t covered = 0;
  for (const auto& q : b) {
    const bool hit = std::any_of(a.begin(), a.end(), [&](const FrontPoint& p) {
      if (p.means.size() != q.means.size()) throw InvalidArgument("fronts differ in dimension");
      for (std::size_t i = 0; i < p.means.size(); ++i) {
        if (p.means[i] < q.means[i]) return false;
      }
      return true;
    });
    if (hit) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(b.size());
}

std::vector<double> normalize_unit(std::span<const double> values) {
  if (values.empty()) return {};
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo, max = *hi;
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(max == min ? 0.5 : (v - min) / (max - min));
  return out;
}

Histogram reward_histogram(std::span<const double> values, std::size_t bins) {
  if (bins == 0) throw InvalidArgument("histogram needs at least one bin");
  Histogram h;
  h.counts.assign(bins, 0);
  if (values.empty()) {
    h.edges.assign(bins + 1, 0.0);
    return h;
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo, max = *hi;
  const double width = (max - min) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.edges.push_back(min + width * static_cast<double>(i));
  h.edges.back() = max;
  for (double v : values) {
    std::size_t b = 0;
    if (width > 0.0) {
      b = static_cast<std::size_t>(std::floor((v - min) / width));
      b = std::min(b, bins - 1);
    }
    ++h.counts[b];
  }
  return h;
}

Histogram reward_histogram(std::span<const SweepRecord> records, std::size_t objective,
                           std::size_t bins) {
  std::vector<double> values;
  values.reserve(records.size());
  for (const auto& r : records) {
    if (objective >= r.rewards.size()) throw InvalidArgument("objective index out of range");
    values.push_back(r.rewards[objective]);
  }
  return reward_histogram(values, bins);
}

std::string records_to_jsonl(std::span<const SweepRecord> records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json line{{"mode", to_string(r.mode)},         {"preference", r.preference},
                        {"query_index", r.query_index},      {"sample_id", r.sample_id},
                        {"response", r.response},            {"rewards", r.rewards}};
    out += line.dump();
    out += '\n';
  }
  return out;
}

std::vector<SweepRecord> records_from_jsonl(std::string_view text) {
  std::vector<SweepRecord> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      SweepRecord r;
      r.mode = parse_sweep_mode(j.at("mode").get<std::string>());
      r.preference = j.at("preference").get<std::vector<double>>();
      r.query_index = j.at("query_index").get<std::size_t>();
      r.sample_id = j.at("sample_id").get<std::size_t>();
      r.response = j.at("response").get<TokenSeq>();
      r.rewards = j.at("rewards").get<std::vector<double>>();
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw InvalidArgument("records line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace prefsteer
