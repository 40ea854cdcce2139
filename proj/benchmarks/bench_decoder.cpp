#include <cmath>
#include <random>

#include <benchmark/benchmark.h>

#include "prefsteer/decoder.hpp"
#include "prefsteer/fixtures.hpp"

using namespace prefsteer;

namespace {

LogProbVector random_logprobs(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> z(0.0, 2.0);
  std::vector<double> v(n);
  for (double& x : v) x = z(gen);
  return LogProbVector::normalized(v);
}

std::vector<ContrastPair> random_pairs(std::size_t vocab, std::size_t n) {
  std::mt19937_64 gen(1);
  std::vector<ContrastPair> pairs;
  for (std::size_t i = 0; i < n; ++i) pairs.push_back({random_logprobs(gen, vocab), random_logprobs(gen, vocab)});
  return pairs;
}

void BM_MultiContrast(benchmark::State& state) {
  const auto vocab = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto pairs = random_pairs(vocab, n);
  const auto pref = Preference::uniform(n);
  for (auto _ : state) benchmark::DoNotOptimize(multi_contrast_dist(pairs, pref));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(vocab));
}
BENCHMARK(BM_MultiContrast)->ArgsProduct({{16, 1024, 32000}, {1, 2, 3}});

void BM_MaskAndFinalize(benchmark::State& state) {
  const auto vocab = static_cast<std::size_t>(state.range(0));
  const auto pairs = random_pairs(vocab, 2);
  const auto ref = ensemble_dist(std::vector<LogProbVector>{pairs[0].expert, pairs[1].expert}, Preference::uniform(2));
  const auto contrast = multi_contrast_dist(pairs, Preference::uniform(2));
  for (auto _ : state) benchmark::DoNotOptimize(finalize_dist(contrast, plausibility_mask(ref, 0.1)));
}
BENCHMARK(BM_MaskAndFinalize)->Arg(1024)->Arg(32000);

void BM_GenerateFixture(benchmark::State& state) {
  const ToyLm lm(fixtures::steering_table());
  const auto& vocab = lm.vocab();
  const std::vector<std::string> ids{"verbose", "terse-polite"};
  const auto objectives = ObjectiveSet::make(fixtures::steering_prompts().pairs(vocab, ids), Preference::uniform(2));
  const TokenSeq query = vocab.encode("q1");
  GenParams g;
  g.max_tokens = fixtures::kSteeringMaxTokens;
  std::uint64_t seed = 0;
  for (auto _ : state) {
    g.seed = seed++;
    benchmark::DoNotOptimize(generate(lm, objectives, query, g));
  }
}
BENCHMARK(BM_GenerateFixture);

}  // namespace

BENCHMARK_MAIN();
