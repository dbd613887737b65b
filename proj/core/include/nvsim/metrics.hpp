#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nvsim/engine.hpp"
#include "nvsim/scheduler.hpp"
#include "nvsim/simulation.hpp"

namespace nvsim {

inline constexpr int kMetricsSchema = 1;

/// Per-job figures, derived from the trace alone.
struct JobMetrics {
  std::string job_id;
  std::string workflow_id;
  std::string owner;
  std::string status;  // completed, killed, failed, rejected, incomplete
  std::uint32_t nodes = 0;
  std::string node_list;

  SimTime submit{};
  std::optional<SimTime> alloc;
  std::optional<SimTime> start;
  std::optional<SimTime> job_end;
  std::optional<SimTime> done;

  // wait + mode_switch + stage_in + run + stage_out == done - submit
  SimDuration wait{};
  SimDuration mode_switch{};
  SimDuration stage_in{};
  SimDuration run{};
  SimDuration stage_out{};
  SimDuration io{};
  SimDuration io_ideal{};
  SimDuration staging_slowdown{};

  Bytes bytes_local = 0;
  Bytes bytes_distributed = 0;
  Bytes bytes_remote_bapm = 0;
  Bytes bytes_external = 0;
  Bytes bytes_staged_in = 0;
  Bytes bytes_staged_out = 0;
  std::string dlm_latency_ns;  // empty unless the job ran in DLM
};

std::vector<JobMetrics> job_metrics(const Trace& trace);

struct NodeMetrics {
  int node = -1;
  std::uint32_t mode_switches = 0;
  Bytes bytes_scrubbed = 0;
  std::uint32_t jobs = 0;
  SimDuration busy{};
  Bytes peak_occupancy = 0;
};

std::vector<NodeMetrics> node_metrics(const Trace& trace, const std::vector<OccupancySample>& occupancy,
                                      std::size_t node_count);

using Summary = std::vector<std::pair<std::string, std::string>>;

/// Global figures: makespan, achieved aggregate I/O bandwidth, energy proxy
/// (moved bytes * e_byte + mode switches * e_switch) and totals.
Summary summarize(const Trace& trace, const std::vector<JobMetrics>& jobs, const ScorerWeights& weights);

void write_jobs_csv(std::ostream& out, const std::vector<JobMetrics>& rows);
void write_nodes_csv(std::ostream& out, const std::vector<NodeMetrics>& rows);
void write_summary_csv(std::ostream& out, const Summary& summary);
/// Long format: metric,entity,time_s,value.
void write_plot_data(std::ostream& out, const std::vector<JobMetrics>& jobs, const std::vector<OccupancySample>& occupancy);

/// Writes jobs.csv, nodes.csv, summary.csv, trace.log and, on request,
/// plot_data.csv into `dir` (created if needed).
void write_run_outputs(const std::filesystem::path& dir, const Simulation& sim, bool plot_data);

}  // namespace nvsim
