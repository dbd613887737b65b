#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nvsim/cluster.hpp"
#include "nvsim/memory_mode.hpp"
#include "nvsim/units.hpp"

namespace nvsim {

enum class Direction { read, write };
enum class Tier { local_fs, distributed_fs, external_fs };
enum class StageMode { none, local_fs, distributed_fs };

std::string_view to_string(Direction d);
std::string_view to_string(Tier t);
std::string_view to_string(StageMode m);
std::optional<Direction> parse_direction(std::string_view s);
std::optional<Tier> parse_tier(std::string_view s);
std::optional<StageMode> parse_stage_mode(std::string_view s);

struct IoPhase {
  SimDuration offset{};
  Bytes bytes = 0;
  Direction direction = Direction::write;
  Tier tier = Tier::external_fs;
  bool checkpoint = false;

  friend bool operator==(const IoPhase&, const IoPhase&) = default;
};

struct OutputSpec {
  std::string id;
  Bytes bytes = 0;
  Tier tier = Tier::external_fs;
  bool stage_out = false;

  friend bool operator==(const OutputSpec&, const OutputSpec&) = default;
};

struct JobSpec {
  std::string job_id;
  SimTime submit_time{};
  std::string workflow_id;  // empty when standalone
  std::string owner;
  std::uint32_t nodes_requested = 1;
  Bytes bapm_bytes_per_node = 0;
  SimDuration compute_seconds{};
  SimDuration walltime_limit{};
  MemoryMode required_mode = MemoryMode::SLM;
  double dlm_hit_rate = 1.0;
  bool retain_outputs = false;
  StageMode stage_inputs = StageMode::none;
  std::vector<std::string> inputs;
  std::vector<IoPhase> io_phases;
  std::vector<OutputSpec> outputs;

  friend bool operator==(const JobSpec&, const JobSpec&) = default;
};

struct WorkflowSpec {
  std::string id;
  SimDuration retention_ttl = std::chrono::hours{24};
  std::vector<std::string> shared_datasets;
  /// job id -> ids of the jobs it waits for
  std::map<std::string, std::vector<std::string>> dependencies;

  friend bool operator==(const WorkflowSpec&, const WorkflowSpec&) = default;
};

struct DataSetSpec {
  std::string id;
  Bytes size = 0;
  std::string owner;
  std::optional<int> node;  // initial B-APM residency; external FS otherwise
  std::string workflow;     // retention tag for node-resident data

  friend bool operator==(const DataSetSpec&, const DataSetSpec&) = default;
};

struct Grant {
  std::string owner;
  std::vector<std::string> principals;

  friend bool operator==(const Grant&, const Grant&) = default;
};

struct WorkloadSpec {
  std::vector<DataSetSpec> datasets;
  std::vector<Grant> grants;
  std::vector<WorkflowSpec> workflows;
  std::vector<JobSpec> jobs;

  friend bool operator==(const WorkloadSpec&, const WorkloadSpec&) = default;
};

/// Parses and validates a workload document. Errors carry the JSON field path
/// (e.g. "jobs[3].inputs[0]") and use SyntaxError, UnitError, UnknownDataset
/// or CyclicWorkflow.
WorkloadSpec parse_workload(std::string_view json_text);
WorkloadSpec load_workload(const std::filesystem::path& path);
std::string workload_to_json(const WorkloadSpec& spec);

/// Structural checks independent of any cluster: unique ids, known dataset
/// references, acyclic workflows, walltime >= compute, offsets within compute.
void validate_workload(const WorkloadSpec& spec);

/// Checks that depend on the cluster: initial placements name existing nodes
/// with enough B-APM and everything fits the external file system.
void validate_workload_against(const WorkloadSpec& spec, const ClusterSpec& cluster);

/// Dataset ids produced as job outputs, mapped to the producing job index.
std::map<std::string, std::size_t> output_producers(const WorkloadSpec& spec);

/// Total I/O bytes a job declares: inputs, phases and outputs.
Bytes declared_io_bytes(const WorkloadSpec& spec, const JobSpec& job);

struct SynthParams {
  std::uint64_t seed = 1;
  std::uint32_t jobs = 50;
  std::uint32_t min_nodes = 1;
  std::uint32_t max_nodes = 4;
  SimDuration min_compute = std::chrono::seconds{60};
  SimDuration max_compute = std::chrono::seconds{3600};
  double io_fraction_lo = 0.05;
  double io_fraction_hi = 0.20;
  SimDuration mean_interarrival = std::chrono::seconds{60};
  double walltime_factor = 1.5;
  double workflow_probability = 0.3;
  std::uint32_t max_workflow_depth = 3;
  SimDuration retention_ttl = std::chrono::hours{1};
  double dlm_probability = 0.1;
  double stage_probability = 0.5;
  double stage_out_probability = 0.5;
  double foreign_input_probability = 0.0;
  double grant_probability = 0.5;
  std::uint32_t principals = 4;
};

/// Reference bandwidth against which the I/O fraction is defined: the external
/// file system's fair share at mean load, capped by the job's own injection.
BytesPerSecond reference_bandwidth(const ClusterSpec& cluster, const SynthParams& params, std::uint32_t job_nodes);

/// I/O fraction of a job as declared: io_time / (compute + io_time) where
/// io_time = declared bytes / reference bandwidth.
double declared_io_fraction(const WorkloadSpec& spec, const JobSpec& job, const ClusterSpec& cluster,
                            const SynthParams& params);

/// Random workload whose jobs are all feasible on `cluster`. Deterministic for
/// a given seed on every platform.
WorkloadSpec synth_workload(const SynthParams& params, const ClusterSpec& cluster);

}  // namespace nvsim
