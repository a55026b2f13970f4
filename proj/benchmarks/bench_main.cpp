#include <benchmark/benchmark.h>

#include "causalkm/eif.hpp"
#include "causalkm/simulation.hpp"

namespace {

using namespace causalkm;

SimSample sample_of(Eigen::Index n) {
  auto rng = make_stream(7, {static_cast<std::uint64_t>(n)});
  return generate_sample(n, rng, SimConfig{});
}

void BM_Lloyd(benchmark::State& state) {
  const SimSample s = sample_of(state.range(0));
  auto rng = make_stream(1);
  const Codebook init = kmeanspp_init(s.mu, 6, rng);
  for (auto _ : state) benchmark::DoNotOptimize(lloyd(s.mu, init).risk);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Lloyd)->Arg(1000)->Arg(4000)->Arg(16000);

void BM_PlugIn(benchmark::State& state) {
  const SimSample s = sample_of(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(plug_in_estimate(s.mu, 6, 3).risk);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_PlugIn)->Arg(1000)->Arg(4000);

void BM_CrossFit(benchmark::State& state) {
  const SimSample s = sample_of(state.range(0));
  const SimConfig cfg;
  const FoldAssignment folds = assign_folds(s.data.n(), 5, 11);
  for (auto _ : state) benchmark::DoNotOptimize(cross_fit(s.data, folds, cfg.outcome, cfg.propensity).phi1.sum());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_CrossFit)->Arg(1000)->Arg(4000)->Unit(benchmark::kMillisecond);

void BM_RiskHat(benchmark::State& state) {
  const SimSample s = sample_of(state.range(0));
  const SimConfig cfg;
  const CrossFitScores scores = cross_fit(s.data, assign_folds(s.data.n(), 5, 11), cfg.outcome, cfg.propensity);
  const Codebook c = hexagon_centers();
  for (auto _ : state) benchmark::DoNotOptimize(risk_hat(scores, c));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RiskHat)->Arg(1000)->Arg(4000)->Arg(16000);

void BM_Gradient(benchmark::State& state) {
  const SimSample s = sample_of(state.range(0));
  const SimConfig cfg;
  const CrossFitScores scores = cross_fit(s.data, assign_folds(s.data.n(), 5, 11), cfg.outcome, cfg.propensity);
  const Codebook c = hexagon_centers();
  for (auto _ : state) benchmark::DoNotOptimize(gradient(scores, c).max_abs());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Gradient)->Arg(4000);

void BM_GeneralizedLloyd(benchmark::State& state) {
  const SimSample s = sample_of(state.range(0));
  const SimConfig cfg;
  const CrossFitScores scores = cross_fit(s.data, assign_folds(s.data.n(), 5, 11), cfg.outcome, cfg.propensity);
  const Codebook start = plug_in_estimate(scores.mu_hat, 6, 3).codebook;
  for (auto _ : state)
    benchmark::DoNotOptimize(minimize_semiparametric(scores, 6, start, SemiMethod::generalized_lloyd).risk);
}
BENCHMARK(BM_GeneralizedLloyd)->Arg(4000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
