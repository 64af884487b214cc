#include <benchmark/benchmark.h>

#include "l2gd/data_io.hpp"
#include "l2gd/harness.hpp"
#include "l2gd/solvers.hpp"
#include "l2gd/theory.hpp"

using namespace l2gd;

namespace {

const ExperimentData& a1a() {
  static const ExperimentData data = [] {
    ExperimentConfig c;
    c.dataset = "builtin:a1a-surrogate";
    c.seed = 1;
    return load_experiment_data(c);
  }();
  return data;
}

void BM_Steps(benchmark::State& state, Variant v) {
  const auto& data = a1a();
  SolverConfig cfg;
  cfg.variant = v;
  cfg.p = 0.09;
  cfg.seed = 1;
  cfg.alpha = theoretical_alpha(data.problem, SolverConfig{Variant::L2SGD_PLUS, 0.0, 0.09}).value();
  const StackedModel x0(data.problem.n(), data.problem.d());
  auto engine = make_engine(data.problem, cfg, x0);
  DrawSource draws(data.problem, cfg);
  for (auto _ : state) {
    engine->step(draws.next());
  }
  engine->finish();
  benchmark::DoNotOptimize(engine->iterate().blocks().data());
  state.SetItemsProcessed(state.iterations());
}

void BM_FullGradient(benchmark::State& state) {
  const auto& data = a1a();
  const StackedModel x(data.problem.n(), data.problem.d());
  for (auto _ : state) benchmark::DoNotOptimize(grad_F(data.problem, x).blocks().data());
}

void BM_AggregationReplay(benchmark::State& state) {
  const auto c = static_cast<std::uint64_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(aggregation_replay(1.1, 0.1, 0.09, 5, c));
}

void BM_Reference(benchmark::State& state) {
  const auto& data = a1a();
  for (auto _ : state) benchmark::DoNotOptimize(reference_solution(data.problem, 0.1).F_star);
}

}  // namespace

BENCHMARK_CAPTURE(BM_Steps, l2sgd_plus, Variant::L2SGD_PLUS);
BENCHMARK_CAPTURE(BM_Steps, l2sgd_plus_efficient, Variant::L2SGD_PLUS_EFFICIENT);
BENCHMARK_CAPTURE(BM_Steps, l2sgdpp, Variant::L2SGDPP);
BENCHMARK_CAPTURE(BM_Steps, l2sgd, Variant::L2SGD);
BENCHMARK_CAPTURE(BM_Steps, l2gd, Variant::L2GD);
BENCHMARK(BM_FullGradient);
BENCHMARK(BM_AggregationReplay)->Arg(1)->Arg(64)->Arg(4096);
BENCHMARK(BM_Reference)->Unit(benchmark::kMillisecond)->Iterations(3);

BENCHMARK_MAIN();
