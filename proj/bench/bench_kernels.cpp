// Serial reference kernels against their OpenMP counterparts on simulated
// panels of increasing region count.

#include <benchmark/benchmark.h>

#include <map>

#include "bentcable/kernels.hpp"
#include "bentcable/sampler.hpp"
#include "bentcable/simulate.hpp"

namespace {

using namespace bentcable;

struct Fixture {
  SimDataset ds;
  SpatialWeights weights;
  ParamState state;
};

const Fixture& fixture(int n_regions) {
  static std::map<int, Fixture> cache;
  auto it = cache.find(n_regions);
  if (it != cache.end()) return it->second;
  Fixture f;
  SimScenario sc;
  sc.n_regions = n_regions;
  f.ds = simulate_dataset(sc, 7);
  f.weights = build_weights(f.ds.graph, {}, WeightMode::unweighted);
  Rng rng = make_rng({7, 1});
  f.state = overdispersed_init(f.ds.panel, HyperConfig{}, f.weights, rng);
  return cache.emplace(n_regions, std::move(f)).first->second;
}

void run_residuals(benchmark::State& st, kernels::Backend b) {
  const Fixture& f = fixture(static_cast<int>(st.range(0)));
  kernels::RegionResiduals out;
  for (auto _ : st) {
    kernels::region_residuals(b, f.ds.panel, f.state, out);
    benchmark::DoNotOptimize(out.ss.data());
  }
  st.SetItemsProcessed(st.iterations() * f.ds.panel.n_observed());
}

void run_bend(benchmark::State& st, kernels::Backend b) {
  const Fixture& f = fixture(static_cast<int>(st.range(0)));
  const int nr = f.ds.panel.n_regions();
  ParamState s = f.state;
  std::vector<Rng> rngs;
  for (int i = 0; i < nr; ++i) rngs.push_back(make_rng({3, static_cast<std::uint64_t>(i)}));
  std::vector<kernels::RegionBendTuning> tuning(nr);
  std::vector<char> all(nr, 1), none(nr, 0);
  kernels::BendSweepConfig cfg;
  cfg.tau_free = all;
  cfg.log_gamma_free = none;
  for (auto _ : st) kernels::bend_sweep(b, f.ds.panel, s, rngs, tuning, cfg);
  st.SetItemsProcessed(st.iterations() * nr);
}

void run_sweep(benchmark::State& st, kernels::Backend b) {
  const Fixture& f = fixture(static_cast<int>(st.range(0)));
  SamplerOptions opt;
  opt.backend = b;
  ChainSampler sampler(f.ds.panel, HyperConfig{}, f.weights, f.state, 11, 0, opt);
  for (auto _ : st) sampler.sweep(false);
}

void BM_ResidualsSerial(benchmark::State& st) { run_residuals(st, kernels::Backend::serial); }
void BM_ResidualsOpenMP(benchmark::State& st) { run_residuals(st, kernels::Backend::openmp); }
void BM_BendSerial(benchmark::State& st) { run_bend(st, kernels::Backend::serial); }
void BM_BendOpenMP(benchmark::State& st) { run_bend(st, kernels::Backend::openmp); }
void BM_SweepSerial(benchmark::State& st) { run_sweep(st, kernels::Backend::serial); }
void BM_SweepOpenMP(benchmark::State& st) { run_sweep(st, kernels::Backend::openmp); }

}  // namespace

BENCHMARK(BM_ResidualsSerial)->Arg(10)->Arg(100)->Arg(400);
BENCHMARK(BM_ResidualsOpenMP)->Arg(10)->Arg(100)->Arg(400);
BENCHMARK(BM_BendSerial)->Arg(10)->Arg(100)->Arg(400);
BENCHMARK(BM_BendOpenMP)->Arg(10)->Arg(100)->Arg(400);
BENCHMARK(BM_SweepSerial)->Arg(10)->Arg(50);
BENCHMARK(BM_SweepOpenMP)->Arg(10)->Arg(50);

BENCHMARK_MAIN();
