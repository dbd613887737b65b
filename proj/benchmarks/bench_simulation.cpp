#include <benchmark/benchmark.h>

#include "nvsim/simulation.hpp"
#include "nvsim/workload.hpp"

using namespace nvsim;

namespace {

ClusterSpec bench_cluster(int nodes) {
  NodeSpec n;
  n.dram_dimm_bytes = 16'000'000'000;
  n.bapm_dimm_bytes = 250'000'000'000;
  n.dram_dimms_per_socket = 6;
  n.bapm_dimms_per_socket = 6;
  n.dram_bw = 100'000'000'000;
  n.bapm_bw = 20'000'000'000;
  n.flops = 2'000'000'000'000;
  n.link_bw = 12'500'000'000;
  n.dram_latency = SimDuration{100};
  ClusterSpec c;
  for (int i = 0; i < nodes; ++i) {
    n.node_id = i;
    c.nodes.push_back(n);
  }
  c.external_fs_bw = 100'000'000'000;
  c.external_fs_capacity = 100'000'000'000'000'000;
  c.mode_switch_seconds = std::chrono::seconds{300};
  return c;
}

static void BM_SimulateSynth(benchmark::State& state) {
  const ClusterSpec cluster = bench_cluster(static_cast<int>(state.range(1)));
  SynthParams p;
  p.seed = 11;
  p.jobs = static_cast<std::uint32_t>(state.range(0));
  p.max_nodes = 8;
  const WorkloadSpec work = synth_workload(p, cluster);
  std::size_t events = 0;
  for (auto _ : state) {
    Simulation sim(cluster, work);
    sim.run();
    events = sim.trace().size();
  }
  state.counters["trace_events"] = static_cast<double>(events);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SimulateSynth)->Args({100, 16})->Args({500, 64})->Args({2000, 256})->Unit(benchmark::kMillisecond);

static void BM_SimulatePolicies(benchmark::State& state) {
  const ClusterSpec cluster = bench_cluster(64);
  SynthParams p;
  p.seed = 5;
  p.jobs = 300;
  p.max_nodes = 16;
  const WorkloadSpec work = synth_workload(p, cluster);
  SimOptions o;
  o.policy.scorer = static_cast<Scorer>(state.range(0));
  for (auto _ : state) {
    Simulation sim(cluster, work, o);
    sim.run();
    benchmark::DoNotOptimize(sim.now());
  }
}
BENCHMARK(BM_SimulatePolicies)->DenseRange(0, 2)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
