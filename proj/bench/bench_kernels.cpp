// Serial reference vs OpenMP kernels on the default-sized ensemble.

#include <benchmark/benchmark.h>

#include "agrae/trainer.hpp"

namespace {

agrae::ExperimentConfig bench_config(benchmark::State& state) {
  agrae::ExperimentConfig cfg;
  cfg.num_queries = static_cast<std::size_t>(state.range(0));
  cfg.num_behaviors = 64;
  cfg.minibatch_passes = 2;
  cfg.kl_beta = 0.01;
  cfg.eval_samples = 0;
  return cfg;
}

template <bool Parallel>
void BM_TrainStep(benchmark::State& state) {
  const auto cfg = bench_config(state);
  agrae::Ensemble ensemble = agrae::make_ensemble(cfg);
  agrae::TrainState ts;
  for (auto _ : state) {
    auto out = Parallel ? agrae::train_step(ensemble, cfg, ts)
                        : agrae::train_step_serial(ensemble, cfg, ts);
    benchmark::DoNotOptimize(out.metrics.mean_entropy);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluatePassk(benchmark::State& state) {
  const auto cfg = bench_config(state);
  const agrae::Ensemble ensemble = agrae::make_ensemble(cfg);
  const std::vector<std::int64_t> ks{1, 2, 4, 8, 16, 32, 64, 128, 256};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(agrae::evaluate_passk(ensemble, 256, ks, seed++));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK_TEMPLATE(BM_TrainStep, false)->Name("train_step/serial")->Arg(64)->Arg(1024);
BENCHMARK_TEMPLATE(BM_TrainStep, true)->Name("train_step/openmp")->Arg(64)->Arg(1024);
BENCHMARK(BM_EvaluatePassk)->Arg(64)->Arg(1024);

BENCHMARK_MAIN();
