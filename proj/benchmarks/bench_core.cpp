#include <benchmark/benchmark.h>

#include "aomcal/aom_pls.hpp"
#include "aomcal/aom_ridge.hpp"
#include "aomcal/fastaom.hpp"
#include "aomcal/oracle.hpp"
#include "aomcal/synthetic.hpp"

using namespace aomcal;

namespace {

SyntheticData data(Index n, Index p) { return planted_derivative(1, {.n = n, .p = p}); }

void BM_ScreenBank(benchmark::State& state) {
  const SyntheticData d = data(state.range(0), 500);
  const Matrix s = cross_covariance(center(d.x, d.y));
  const OperatorBank bank = compact_bank(500);
  for (auto _ : state) benchmark::DoNotOptimize(screen_bank(s, bank));
}
BENCHMARK(BM_ScreenBank)->Arg(500)->Arg(5000)->Unit(benchmark::kMicrosecond);

void BM_SelectGlobal(benchmark::State& state) {
  const SyntheticData d = data(150, state.range(0));
  AomPlsConfig cfg;
  cfg.bank = compact_bank(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(select_global(d.x, d.y, cfg));
}
BENCHMARK(BM_SelectGlobal)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

// The same grid fitted cell by cell on materialised spectra.
void BM_ExplicitGrid(benchmark::State& state) {
  const SyntheticData d = data(150, state.range(0));
  const OperatorBank bank = compact_bank(state.range(0));
  const FoldPlan plan = kfold_plan(150, 5, 0);
  for (auto _ : state) benchmark::DoNotOptimize(explicit_grid_select(d.x, d.y, bank, 15, plan));
}
BENCHMARK(BM_ExplicitGrid)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_FitAomRidge(benchmark::State& state) {
  const SyntheticData d = data(150, state.range(0));
  RidgeConfig cfg;
  cfg.bank = compact_bank(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit_aom_ridge(d.x, d.y, cfg));
}
BENCHMARK(BM_FitAomRidge)->Arg(256)->Arg(1024)->Unit(benchmark::kMillisecond);

void BM_ScoreChains(benchmark::State& state) {
  const SyntheticData d = data(state.range(0), 500);
  const CenteredData c = center(d.x, d.y);
  const TruncatedSvd svd = truncated_svd(c.xc, 100, 0, 1e-6);
  const OperatorBank bank = compact_bank(500);
  const auto chains = enumerate_chains(bank, 2);
  const Vector xty = cross_covariance(c).col(0);
  for (auto _ : state)
    benchmark::DoNotOptimize(score_chains(bank, chains, svd, xty, c.yc.norm()));
}
BENCHMARK(BM_ScoreChains)->Arg(500)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_TruncatedSvd(benchmark::State& state) {
  const SyntheticData d = data(state.range(0), 500);
  const CenteredData c = center(d.x, d.y);
  for (auto _ : state) benchmark::DoNotOptimize(truncated_svd(c.xc, 100, 0, 1e-6));
}
BENCHMARK(BM_TruncatedSvd)->Arg(500)->Unit(benchmark::kMillisecond);

void BM_FitFastAom(benchmark::State& state) {
  const SyntheticData d = data(150, 256);
  FastAomConfig cfg;
  cfg.bank = compact_bank(256);
  for (auto _ : state) benchmark::DoNotOptimize(fit_fastaom(d.x, d.y, cfg));
}
BENCHMARK(BM_FitFastAom)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
