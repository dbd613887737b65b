#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "nvsim/metrics.hpp"
#include "nvsim/simulation.hpp"
#include "sim_util.hpp"
#include "support.hpp"

using namespace nvsim;
using namespace nvsim::testing;

namespace {

std::string value_of(const Summary& s, std::string_view key) {
  for (const auto& [k, v] : s) {
    if (k == key) return v;
  }
  return "<missing>";
}

const JobMetrics& row(const std::vector<JobMetrics>& rows, std::string_view id) {
  for (const JobMetrics& m : rows) {
    if (m.job_id == id) return m;
  }
  throw std::runtime_error("no row");
}

}  // namespace

TEST(JobMetrics, StagedJobDecomposition) {
  WorkloadSpec w;
  w.datasets.push_back(DataSetSpec{"in", 300 * GB, "alice", std::nullopt, ""});
  JobSpec j = make_job("j", 1, 10);
  j.inputs = {"in"};
  j.stage_inputs = StageMode::local_fs;
  j.outputs.push_back(OutputSpec{"out", 100 * GB, Tier::local_fs, true});
  j.walltime_limit = secs(100);
  w.jobs.push_back(j);
  Simulation sim(reference_cluster(1), w);
  sim.run();
  const auto rows = job_metrics(sim.trace());
  ASSERT_EQ(rows.size(), 1u);
  const JobMetrics& m = rows[0];
  EXPECT_EQ(m.status, "completed");
  EXPECT_EQ(m.wait, SimDuration{0});
  EXPECT_EQ(m.stage_in, secs(24));
  // read 300 GB at 20 GB/s, compute 10 s, write 100 GB locally at 20 GB/s.
  EXPECT_EQ(m.run, secs(15 + 10 + 5));
  EXPECT_EQ(m.stage_out, secs(8));
  EXPECT_EQ(m.io, secs(20));
  EXPECT_EQ(m.staging_slowdown, SimDuration{0});
  EXPECT_EQ(m.bytes_staged_in, 300 * GB);
  EXPECT_EQ(m.bytes_staged_out, 100 * GB);
  EXPECT_EQ(m.bytes_local, 400 * GB);
  EXPECT_EQ(m.node_list, "0");
}

TEST(JobMetrics, ContentionShowsAsSlowdown) {
  WorkloadSpec w;
  w.datasets.push_back(DataSetSpec{"in", 100 * GB, "alice", std::nullopt, ""});
  for (const char* id : {"a", "b"}) {
    JobSpec j = make_job(id, 1, 10);
    j.inputs = {"in"};
    j.walltime_limit = secs(100);
    w.jobs.push_back(j);
  }
  // 12.5 GB/s external file system shared by two readers.
  Simulation sim(reference_cluster(2, 12'500'000'000), w);
  sim.run();
  const auto rows = job_metrics(sim.trace());
  for (const JobMetrics& m : rows) {
    EXPECT_EQ(m.io, secs(16));
    EXPECT_EQ(m.io_ideal, secs(8));
    EXPECT_EQ(m.staging_slowdown, secs(8));
    EXPECT_EQ(m.bytes_external, 100 * GB);
  }
}

TEST(JobMetrics, PartsSumToTurnaround) {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    std::mt19937_64 rng(seed);
    const ClusterSpec c = random_cluster(rng);
    const WorkloadSpec w = random_workload(rng, c);
    Simulation sim(c, w);
    sim.run();
    for (const JobMetrics& m : job_metrics(sim.trace())) {
      if (m.status == "rejected") {
        EXPECT_EQ(m.done, m.submit);
        continue;
      }
      ASSERT_TRUE(m.done.has_value()) << seed << " " << m.job_id;
      EXPECT_EQ(m.wait + m.mode_switch + m.stage_in + m.run + m.stage_out, *m.done - m.submit)
          << seed << " " << m.job_id;
      EXPECT_GE(m.wait.count(), 0);
      EXPECT_GE(m.staging_slowdown.count(), 0);
    }
  }
}

TEST(JobMetrics, DlmLatencyReported) {
  WorkloadSpec w;
  JobSpec j = make_job("d", 1, 10);
  j.required_mode = MemoryMode::DLM;
  j.dlm_hit_rate = 0.5;
  w.jobs.push_back(j);
  Simulation sim(reference_cluster(1), w);
  sim.run();
  const JobMetrics& m = row(job_metrics(sim.trace()), "d");
  EXPECT_EQ(m.dlm_latency_ns, "300.000");
  EXPECT_EQ(m.mode_switch, secs(300));
}

TEST(NodeMetrics, SwitchesScrubsAndBusyTime) {
  WorkloadSpec w;
  JobSpec j = make_job("d", 1, 10);
  j.required_mode = MemoryMode::DLM;
  w.jobs.push_back(j);
  w.datasets.push_back(DataSetSpec{"old", 10 * GB, "alice", 0, ""});
  Simulation sim(reference_cluster(2), w);
  sim.run_until_jobs_done();
  const auto nodes = node_metrics(sim.trace(), sim.occupancy(), 2);
  ASSERT_EQ(nodes.size(), 2u);
  EXPECT_EQ(nodes[0].mode_switches, 1u);
  EXPECT_EQ(nodes[0].bytes_scrubbed, 10 * GB);
  EXPECT_EQ(nodes[0].jobs, 1u);
  EXPECT_EQ(nodes[0].busy, secs(310));
  EXPECT_EQ(nodes[0].peak_occupancy, 100 * GB);
  EXPECT_EQ(nodes[1].jobs, 0u);
}

TEST(Summary, TotalsAndEnergy) {
  WorkloadSpec w;
  w.datasets.push_back(DataSetSpec{"in", 100 * GB, "alice", std::nullopt, ""});
  JobSpec j = make_job("j", 1, 10);
  j.inputs = {"in"};
  j.walltime_limit = secs(100);
  w.jobs.push_back(j);
  w.jobs.push_back(make_job("big", 9, 1));
  Simulation sim(reference_cluster(1), w);
  sim.run();
  const auto rows = job_metrics(sim.trace());
  ScorerWeights weights;
  const Summary s = summarize(sim.trace(), rows, weights);
  EXPECT_EQ(value_of(s, "jobs"), "2");
  EXPECT_EQ(value_of(s, "completed"), "1");
  EXPECT_EQ(value_of(s, "rejected"), "1");
  EXPECT_EQ(value_of(s, "io_bytes"), "100000000000");
  EXPECT_EQ(value_of(s, "makespan_s"), "18.000000000");
  EXPECT_EQ(value_of(s, "mode_switches"), "0");
  EXPECT_EQ(value_of(s, "metrics_schema"), "1");
}

TEST(Csv, HeadersAreStable) {
  std::ostringstream jobs, nodes, summary, plot;
  write_jobs_csv(jobs, {});
  write_nodes_csv(nodes, {});
  write_summary_csv(summary, {});
  write_plot_data(plot, {}, {});
  EXPECT_EQ(jobs.str(),
            "job_id,workflow_id,owner,status,nodes,node_list,submit_s,alloc_s,start_s,job_end_s,done_s,"
            "wait_s,mode_switch_s,stage_in_s,run_s,stage_out_s,io_s,io_ideal_s,staging_slowdown_s,"
            "bytes_local,bytes_distributed,bytes_remote_bapm,bytes_external,bytes_staged_in,bytes_staged_out,"
            "dlm_latency_ns\n");
  EXPECT_EQ(nodes.str(), "node_id,mode_switches,bytes_scrubbed,jobs,busy_s,peak_occupancy_bytes\n");
  EXPECT_EQ(summary.str(), "key,value\n");
  EXPECT_EQ(plot.str(), "metric,entity,time_s,value\n");
}

TEST(Csv, RunOutputsAreWritten) {
  const auto dir = std::filesystem::temp_directory_path() / "nvsim-metrics-test";
  std::filesystem::remove_all(dir);
  WorkloadSpec w;
  w.jobs.push_back(make_job("a", 2, 5));
  Simulation sim(reference_cluster(2), w);
  sim.run();
  write_run_outputs(dir, sim, true);
  for (const char* f : {"jobs.csv", "nodes.csv", "summary.csv", "trace.log", "plot_data.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / f)) << f;
  }
  std::ifstream in(dir / "jobs.csv");
  std::string header, line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(line.rfind("a,,alice,completed,2,\"0,1\",0.000000000,", 0), 0u) << line;
  std::ifstream tr(dir / "trace.log");
  std::stringstream text;
  text << tr.rdbuf();
  EXPECT_EQ(Trace::parse(text.str()), sim.trace());
  std::filesystem::remove_all(dir);
}
