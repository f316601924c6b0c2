#include <benchmark/benchmark.h>

#include "velander/evaluation.hpp"
#include "velander/model.hpp"
#include "velander/solver.hpp"
#include "velander/synthetic.hpp"

namespace {

using namespace velander;

std::vector<CustomerRecord> population(std::size_t n) {
  VelanderSurfaceSpec spec;
  spec.customers = n;
  return velander_surface_records(spec, 17);
}

// Full 81-level grid; range(0) customers, range(1) regime index.
void BM_Fit(benchmark::State& state) {
  const auto records = population(static_cast<std::size_t>(state.range(0)));
  const auto regime = static_cast<Regime>(state.range(1));
  const FitProblem problem(records, QuantileGrid::standard(), regime);
  int iterations = 0;
  for (auto _ : state) {
    const auto result = fit(problem);
    iterations = result.diagnostics.iterations;
    benchmark::DoNotOptimize(result.achieved_apl);
  }
  state.counters["ipm_iterations"] = iterations;
}
BENCHMARK(BM_Fit)
    ->ArgsProduct({{250, 1000, 5000}, {0, 1, 2, 3}})
    ->Unit(benchmark::kMillisecond);

void BM_AveragePinballLoss(benchmark::State& state) {
  const auto records = population(static_cast<std::size_t>(state.range(0)));
  const auto params = fit(FitProblem(records, QuantileGrid::standard(), Regime::C4)).params;
  for (auto _ : state) benchmark::DoNotOptimize(average_pinball_loss(records, params));
  state.SetItemsProcessed(state.iterations() * state.range(0) * 81);
}
BENCHMARK(BM_AveragePinballLoss)->Arg(1000)->Arg(5000);

void BM_KFold(benchmark::State& state) {
  const auto records = population(2000);
  EvaluationOptions options;
  options.threads = static_cast<unsigned>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(kfold_cv(records, QuantileGrid::standard(), Regime::C4, 5, 3, options).mean_test_apl);
  }
}
BENCHMARK(BM_KFold)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond)->UseRealTime();

}  // namespace

BENCHMARK_MAIN();
