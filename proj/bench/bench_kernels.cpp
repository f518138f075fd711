// Parallel metric kernels against the pair-by-pair reference loops, on the
// supervised network and a 40-item probe set.

#include <benchmark/benchmark.h>

#include "fbench/metrics.hpp"
#include "fbench/random.hpp"

namespace {

struct Fixture {
  fb::NetworkParams params = fb::init_network(fb::NetworkSpec::mnist(), 7);
  fb::OptimizerConfig config{fb::OptimizerKind::adam, 0.001};
  fb::OptimizerState state;
  fb::LabeledBatch batch;
  fb::InterferenceProbe probe;

  explicit Fixture(int n) {
    fb::Rng rng = fb::make_rng(7, fb::Stream::synth);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    batch.inputs.resize(784, n);
    for (int c = 0; c < n; ++c) {
      for (int r = 0; r < 784; ++r) batch.inputs(r, c) = u(rng);
      batch.units.push_back(c % 4);
    }
    state = fb::OptimizerState::fresh(config, params.size());
    // A few real updates so the moment buffers are not trivial.
    for (int c = 0; c < n; ++c)
      fb::apply_update(config, state, params,
                       fb::loss_and_gradient(params, batch.inputs.col(c), fb::ClassId{batch.units[c]},
                                             fb::LossKind::cross_entropy));
    probe = fb::make_supervised_probe(params, batch);
  }
};

void BM_OverlapParallel(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(fb::activation_overlap(f.params, f.batch.inputs));
}

void BM_OverlapReference(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(fb::reference::activation_overlap(f.params, f.batch.inputs));
}

void BM_InterferenceParallel(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(fb::pairwise_interference(f.params, f.config, f.state, f.probe).mean);
}

void BM_InterferenceReference(benchmark::State& st) {
  Fixture f(static_cast<int>(st.range(0)));
  for (auto _ : st)
    benchmark::DoNotOptimize(fb::reference::pairwise_interference(f.params, f.config, f.state, f.probe).mean);
}

}  // namespace

BENCHMARK(BM_OverlapParallel)->Arg(40)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_OverlapReference)->Arg(40)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_InterferenceParallel)->Arg(40)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_InterferenceReference)->Arg(40)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
