#include <gtest/gtest.h>

#include <string>

#include "nvsim/workload.hpp"
#include "support.hpp"

using namespace nvsim;
using namespace nvsim::testing;

namespace {

std::string message_of(const std::string& text) {
  try {
    parse_workload(text);
  } catch (const SimError& e) {
    return e.what();
  }
  return {};
}

const char* kMinimal = R"({
  "format_version": 1,
  "jobs": [{"job_id": "j", "submit_time": "0 s", "owner": "alice", "nodes_requested": 1,
            "bapm_bytes_per_node": "1 GB", "compute_seconds": "10 s", "walltime_limit": "10 s"}]
})";

}  // namespace

TEST(Workload, MinimalDocument) {
  const WorkloadSpec w = parse_workload(kMinimal);
  ASSERT_EQ(w.jobs.size(), 1u);
  const JobSpec& j = w.jobs[0];
  EXPECT_EQ(j.compute_seconds, secs(10));
  EXPECT_EQ(j.required_mode, MemoryMode::SLM);
  EXPECT_EQ(j.stage_inputs, StageMode::none);
  EXPECT_TRUE(j.workflow_id.empty());
  EXPECT_DOUBLE_EQ(j.dlm_hit_rate, 1.0);
}

TEST(Workload, ShippedPipelineParsesAndRoundTrips) {
  const WorkloadSpec w = load_workload(std::string(NVSIM_SOURCE_DIR) + "/data/workloads/pipeline.json");
  EXPECT_EQ(w.jobs.size(), 4u);
  EXPECT_EQ(w.workflows.at(0).retention_ttl, std::chrono::hours{1});
  EXPECT_EQ(w.datasets.at(1).node, 0);
  EXPECT_EQ(w.jobs.at(1).io_phases.size(), 2u);
  EXPECT_EQ(parse_workload(workload_to_json(w)), w);
}

TEST(Workload, UnknownInputNamesItsPath) {
  std::string bad = kMinimal;
  bad.insert(bad.find("\"walltime_limit\""), "\"inputs\": [\"ghost\"], ");
  EXPECT_EQ(error_of([&] { parse_workload(bad); }), ErrorCode::UnknownDataset);
  EXPECT_NE(message_of(bad).find("jobs[0].inputs[0]"), std::string::npos) << message_of(bad);
}

TEST(Workload, CyclicDependenciesAreRejected) {
  const std::string text = R"({
    "format_version": 1,
    "workflows": [{"id": "w", "dependencies": {"a": ["b"], "b": ["a"]}}],
    "jobs": [
      {"job_id": "a", "workflow_id": "w", "submit_time": "0 s", "owner": "o", "nodes_requested": 1,
       "bapm_bytes_per_node": "1 GB", "compute_seconds": "1 s", "walltime_limit": "1 s"},
      {"job_id": "b", "workflow_id": "w", "submit_time": "0 s", "owner": "o", "nodes_requested": 1,
       "bapm_bytes_per_node": "1 GB", "compute_seconds": "1 s", "walltime_limit": "1 s"}
    ]})";
  EXPECT_EQ(error_of([&] { parse_workload(text); }), ErrorCode::CyclicWorkflow);
}

TEST(Workload, StructuralErrors) {
  std::string wall = kMinimal;
  wall.replace(wall.find("\"walltime_limit\": \"10 s\""), 24, "\"walltime_limit\": \"5 s\"");
  EXPECT_NE(message_of(wall).find("jobs[0].walltime_limit"), std::string::npos);

  std::string units = kMinimal;
  units.replace(units.find("\"1 GB\""), 6, "\"1 GB/s\"");
  EXPECT_EQ(error_of([&] { parse_workload(units); }), ErrorCode::UnitError);

  std::string version = kMinimal;
  version.replace(version.find("\"format_version\": 1"), 19, "\"format_version\": 2");
  EXPECT_EQ(error_of([&] { parse_workload(version); }), ErrorCode::SyntaxError);

  std::string rate = kMinimal;
  rate.insert(rate.find("\"walltime_limit\""), "\"dlm_hit_rate\": 1.5, ");
  EXPECT_EQ(error_of([&] { parse_workload(rate); }), ErrorCode::HitRateOutOfRange);

  std::string zero = kMinimal;
  zero.replace(zero.find("\"nodes_requested\": 1"), 20, "\"nodes_requested\": 0");
  EXPECT_NE(message_of(zero).find("nodes_requested"), std::string::npos);
}

TEST(Workload, ClusterChecks) {
  WorkloadSpec w = parse_workload(kMinimal);
  w.datasets.push_back(DataSetSpec{"d", 4 * TB, "alice", 0, ""});
  EXPECT_EQ(error_of([&] { validate_workload_against(w, reference_cluster(1)); }), ErrorCode::InsufficientCapacity);
  w.datasets[0].node = 7;
  EXPECT_EQ(error_of([&] { validate_workload_against(w, reference_cluster(1)); }), ErrorCode::SyntaxError);
  w.datasets[0].node = std::nullopt;
  EXPECT_NO_THROW(validate_workload_against(w, reference_cluster(1)));
}

TEST(Workload, DeclaredIoCountsInputsPhasesAndOutputs) {
  WorkloadSpec w;
  w.datasets.push_back(DataSetSpec{"in", 10 * GB, "alice", std::nullopt, ""});
  JobSpec j = make_job("j", 1, 100);
  j.inputs = {"in"};
  j.io_phases.push_back(IoPhase{secs(10), 5 * GB, Direction::write, Tier::external_fs, true});
  j.outputs.push_back(OutputSpec{"out", 3 * GB, Tier::external_fs, false});
  w.jobs.push_back(j);
  EXPECT_EQ(declared_io_bytes(w, j), 18 * GB);
  EXPECT_EQ(output_producers(w).at("out"), 0u);
}
