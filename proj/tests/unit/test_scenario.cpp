#include <gtest/gtest.h>

#include "nvsim/scenario.hpp"
#include "sim_util.hpp"
#include "support.hpp"

using namespace nvsim;
using namespace nvsim::testing;

TEST(BurstBuffer, EightStepsInOrder) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    BurstBufferOptions o;
    o.seed = seed;
    const BurstBufferRun run = run_burst_buffer(o);
    ASSERT_EQ(run.steps.size(), 8u) << seed;
    for (std::size_t i = 1; i < run.steps.size(); ++i) {
      EXPECT_LT(run.steps[i - 1].seq, run.steps[i].seq) << seed;
      EXPECT_LE(run.steps[i - 1].time, run.steps[i].time) << seed;
    }
    EXPECT_EQ(run.steps[2].name, "stage-in");
    const Event* mount = first_of(run.sim->trace(), EventKind::fs_mount, kBurstBufferJob);
    ASSERT_NE(mount, nullptr);
  }
}

TEST(BurstBuffer, WithoutStageInReadsComeFromExternal) {
  BurstBufferOptions o;
  o.seed = 3;
  o.stage_in = false;
  const BurstBufferRun run = run_burst_buffer(o);
  EXPECT_EQ(run.steps.size(), 7u);
  for (const Event* e : events_of(run.sim->trace(), EventKind::io_start, kBurstBufferJob)) {
    if (e->fields.at("dir") == "read") EXPECT_EQ(e->fields.at("path"), "external");
  }
  EXPECT_TRUE(events_of(run.sim->trace(), EventKind::stage_end, kBurstBufferJob).size() >= 1u);
}

TEST(BurstBuffer, EarlyLaunchIsCaught) {
  BurstBufferOptions o;
  o.force_early_launch = true;
  EXPECT_EQ(error_of([&] { run_burst_buffer(o); }), ErrorCode::OrderingViolation);
}

TEST(BurstBuffer, VerifierRejectsSwappedRecords) {
  BurstBufferOptions o;
  const BurstBufferRun run = run_burst_buffer(o);
  Trace t = run.sim->trace();
  std::vector<Event> events = t.events();
  // Drop every stage_end of the stage-in.
  Trace cut;
  for (const Event& e : events) {
    if (e.kind == EventKind::stage_end && e.fields.get("direction") != "out") continue;
    cut.append(e);
  }
  EXPECT_EQ(error_of([&] { verify_burst_buffer(cut, true); }), ErrorCode::OrderingViolation);
}

TEST(BurstBuffer, ScenarioIsDeterministic) {
  BurstBufferOptions o;
  o.seed = 17;
  EXPECT_EQ(run_burst_buffer(o).sim->trace(), run_burst_buffer(o).sim->trace());
  EXPECT_EQ(burst_buffer_workload(17, true), burst_buffer_workload(17, true));
  EXPECT_EQ(burst_buffer_cluster(17), burst_buffer_cluster(17));
}
