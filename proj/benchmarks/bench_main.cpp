#include <benchmark/benchmark.h>

#include "foldmix/folded.hpp"
#include "foldmix/folded_asymptotics.hpp"
#include "foldmix/mixture.hpp"
#include "foldmix/mixture_fit.hpp"

using namespace foldmix;

namespace {

const MixtureParams kTruth({0.5, 0.5}, {-2.0, 2.0}, {1.0, 1.0});

void BM_MuHat(benchmark::State& state) {
  const FoldedSample s = sample_folded(FoldedParams(1.0, 1.0), static_cast<std::size_t>(state.range(0)), 1);
  const double sigma = 0.8 * s.threshold_sigma();
  for (auto _ : state) benchmark::DoNotOptimize(mu_hat(sigma, s));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_MuHat)->RangeMultiplier(4)->Range(256, 16384)->Complexity(benchmark::oN);

void BM_FitFolded(benchmark::State& state) {
  const FoldedSample s = sample_folded(FoldedParams(0.0, 1.0), static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(fit_folded(s).profile_value);
}
BENCHMARK(BM_FitFolded)->RangeMultiplier(4)->Range(256, 16384)->Unit(benchmark::kMillisecond);

void BM_EmStep(benchmark::State& state) {
  const auto x = sample_mixture(kTruth, static_cast<std::size_t>(state.range(0)), 3);
  const SearchBox box = sieve_box(SieveSpec{2, 3.0, 0.05});
  for (auto _ : state) benchmark::DoNotOptimize(em_step(x, kTruth, box, 0.0));
}
BENCHMARK(BM_EmStep)->Arg(250)->Arg(1000)->Arg(4000);

void BM_FitSieveMle(benchmark::State& state) {
  const auto x = sample_mixture(kTruth, static_cast<std::size_t>(state.range(0)), 4);
  FitConfig cfg;
  cfg.restarts = 4;
  for (auto _ : state) benchmark::DoNotOptimize(fit_sieve_mle(x, SieveSpec{2, 3.0, 0.05}, cfg).objective);
}
BENCHMARK(BM_FitSieveMle)->Arg(250)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_DMin(benchmark::State& state) {
  MixtureParams a({0.2, 0.3, 0.1, 0.4}, {-1.0, 0.0, 0.5, 2.0}, {1.0, 0.5, 2.0, 1.0});
  const std::vector<double> w = {0.25, 0.25, 0.25, 0.25};
  const MixtureParams b(w, {2.1, -0.9, 0.4, 0.1}, {1.1, 0.9, 1.8, 0.6});
  for (auto _ : state) benchmark::DoNotOptimize(d_min(a, b));
}
BENCHMARK(BM_DMin);

}  // namespace

BENCHMARK_MAIN();
