#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "nvsim/flow.hpp"

using namespace nvsim;
using namespace nvsim::flow;

namespace {

constexpr BytesPerSecond kGBps = 1'000'000'000;

// Star topology: every flow crosses its node link and one shared file system.
static void BM_MaxMinStar(benchmark::State& state) {
  const auto flows = static_cast<std::size_t>(state.range(0));
  std::vector<Rate> caps{rate_from_bandwidth(100 * kGBps)};
  std::vector<std::vector<ResourceId>> paths;
  std::mt19937_64 rng(1);
  for (std::size_t f = 0; f < flows; ++f) {
    caps.push_back(rate_from_bandwidth((5 + rng() % 20) * kGBps));
    paths.push_back({0, f + 1});
  }
  std::vector<FlowDemand> demands;
  for (const auto& p : paths) demands.push_back(FlowDemand{p, std::nullopt});
  for (auto _ : state) benchmark::DoNotOptimize(max_min_rates(caps, demands));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(flows));
}
BENCHMARK(BM_MaxMinStar)->RangeMultiplier(4)->Range(4, 1024);

static void BM_FlowChurn(benchmark::State& state) {
  const auto flows = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    FlowNetwork net;
    const ResourceId fs = net.add_resource("fs", 100 * kGBps);
    std::vector<ResourceId> links;
    for (std::size_t i = 0; i < 16; ++i) links.push_back(net.add_resource("link", 12 * kGBps));
    std::mt19937_64 rng(7);
    FineTime t = 0;
    for (std::size_t f = 0; f < flows; ++f) {
      t += fine_from_ns(static_cast<std::int64_t>(rng() % 50'000'000));
      net.advance_to(t);
      net.add(t, {fs, links[f % links.size()]}, 1 + rng() % 10'000'000'000);
    }
    benchmark::DoNotOptimize(net.advance_to(fine_from_ns(std::int64_t{1} << 50)));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(flows));
}
BENCHMARK(BM_FlowChurn)->RangeMultiplier(4)->Range(16, 1024);

}  // namespace
