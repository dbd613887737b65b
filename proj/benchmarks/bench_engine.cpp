#include <benchmark/benchmark.h>

#include <random>

#include "nvsim/engine.hpp"

using namespace nvsim;

namespace {

static void BM_EngineTimers(benchmark::State& state) {
  const auto n = state.range(0);
  for (auto _ : state) {
    Engine engine;
    std::mt19937_64 rng(3);
    std::int64_t fired = 0;
    for (std::int64_t i = 0; i < n; ++i) {
      engine.timer(at_ns(static_cast<std::int64_t>(rng() % 1'000'000'000)), [&fired] { ++fired; });
    }
    engine.run();
    benchmark::DoNotOptimize(fired);
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EngineTimers)->RangeMultiplier(8)->Range(64, 1 << 18);

static void BM_EngineTraced(benchmark::State& state) {
  const auto n = state.range(0);
  for (auto _ : state) {
    Engine engine;
    for (std::int64_t i = 0; i < n; ++i) {
      Fields f;
      f.add("job", i).add("bytes", std::int64_t{1'000'000'000});
      engine.schedule(at_ns(i * 10), EventKind::io_end, std::move(f));
    }
    engine.run();
    benchmark::DoNotOptimize(engine.trace().size());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_EngineTraced)->RangeMultiplier(8)->Range(64, 1 << 16);

}  // namespace
