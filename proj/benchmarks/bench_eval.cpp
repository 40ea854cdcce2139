#include <random>

#include <benchmark/benchmark.h>

#include "prefsteer/eval.hpp"
#include "prefsteer/stats.hpp"
#include "prefsteer/wire.hpp"

using namespace prefsteer;

namespace {

void BM_ParetoFront(benchmark::State& state) {
  std::mt19937_64 gen(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FrontPoint> pts;
  for (std::int64_t i = 0; i < state.range(0); ++i) pts.push_back(FrontPoint{{}, {u(gen), u(gen)}});
  for (auto _ : state) benchmark::DoNotOptimize(pareto_front(pts));
}
BENCHMARK(BM_ParetoFront)->Arg(11)->Arg(66)->Arg(1000);

void BM_Spearman(benchmark::State& state) {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> z;
  std::vector<double> x(static_cast<std::size_t>(state.range(0))), y(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] = z(gen)) + z(gen);
  for (auto _ : state) benchmark::DoNotOptimize(spearman_rho(x, y));
}
BENCHMARK(BM_Spearman)->Arg(220)->Arg(10000);

void BM_WireLogprobsRoundTrip(benchmark::State& state) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> z;
  wire::LogprobsReply reply{1, std::vector<double>(static_cast<std::size_t>(state.range(0)))};
  for (double& x : reply.logprobs) x = z(gen) - 10.0;
  for (auto _ : state) benchmark::DoNotOptimize(wire::decode(wire::encode(reply)));
}
BENCHMARK(BM_WireLogprobsRoundTrip)->Arg(16)->Arg(32000);

}  // namespace

BENCHMARK_MAIN();
