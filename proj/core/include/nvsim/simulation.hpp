#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nvsim/cluster.hpp"
#include "nvsim/data_scheduler.hpp"
#include "nvsim/engine.hpp"
#include "nvsim/scheduler.hpp"
#include "nvsim/state.hpp"
#include "nvsim/storage.hpp"
#include "nvsim/workload.hpp"

namespace nvsim {

struct FlowPlan;

struct SimOptions {
  Policy policy;
  /// Runs the invariant checker after every processed event, and the full
  /// catalogue audit when a run returns; a failure throws
  /// SimError(InvariantViolation).
  bool check_invariants = true;
  /// Fault injection: launch jobs without waiting for their stage-ins.
  bool launch_before_stage_in = false;
};

enum class JobPhase { pending, rejected, gated, queued, allocated, staging, running, finishing, done };
std::string_view to_string(JobPhase p);

/// Live bookkeeping of one job. Reported times are in the trace; this is
/// what the simulator needs while the job is in flight.
struct JobRun {
  JobSpec spec;
  std::size_t index = 0;
  JobPhase phase = JobPhase::pending;
  std::string end_status;  // completed, killed, failed, rejected
  std::vector<int> nodes;
  std::vector<std::size_t> successors;
  std::size_t waiting_on = 0;
  std::vector<int> eligible;
  std::vector<std::string> staged_inputs;  // inputs copied to node-local B-APM
  SimDuration stage_estimate{};
  SimTime alloc_time{};
  SimTime start_time{};
  bool switched = false;
  int fs = -1;
  std::size_t pending_switches = 0;
  std::size_t pending_stage_ins = 0;
  std::size_t pending_stage_outs = 0;
  std::vector<ReplicaId> held;           // retained data absorbed or reused while running
  std::vector<ReplicaId> staged_created; // replicas this job staged in
  std::vector<ReplicaId> scratch;        // job-private node data
  std::map<std::size_t, ReplicaId> output_replicas;
  std::map<TransferService::TransferId, std::function<void()>> flows;  // active I/O and their undo
  std::map<ReplicaId, std::size_t> writing;                            // replicas still receiving chunks
  std::vector<std::pair<int, std::int64_t>> steps;                     // (kind, argument)
  std::size_t step = 0;
  std::uint64_t generation = 0;
  bool launched = false;
};

struct OccupancySample {
  SimTime time{};
  int node = -1;
  Bytes used = 0;  // reservations plus replicas
};

struct BackfillAudit {
  std::uint64_t passes = 0;
  std::uint64_t decisions = 0;   // passes that launched a job ahead of a waiting head
  std::uint64_t head_delays = 0; // passes after which the head's reservation moved later
};

/// Whole-cluster simulation: job scheduler, data scheduler and storage tiers
/// driven by one event engine.
class Simulation {
 public:
  /// Validates all inputs (SimError on failure) and queues the submissions.
  Simulation(ClusterSpec cluster, WorkloadSpec workload, SimOptions options = {});
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;
  ~Simulation();

  /// Runs until nothing is left to do (including retention expiries), or
  /// until `until`.
  void run(std::optional<SimTime> until = std::nullopt);
  /// Runs until every job is done or rejected; retained data may remain.
  void run_until_jobs_done();
  bool all_jobs_done() const;

  /// Scheduler-independent mode change of an idle node. Returns the time the
  /// node becomes available. Switching to the current mode is a zero-length
  /// no-op. Throws NodeBusy or DlmRequiresDram.
  SimTime set_mode(int node, MemoryMode mode);

  const Trace& trace() const { return engine_.trace(); }
  SimTime now() const { return engine_.now(); }
  const ClusterState& state() const { return state_; }
  const std::vector<JobRun>& jobs() const { return jobs_; }
  const std::vector<OccupancySample>& occupancy() const { return occupancy_; }
  const BackfillAudit& backfill_audit() const { return audit_; }
  const SimOptions& options() const { return options_; }
  const WorkloadSpec& workload() const { return workload_; }

  Engine& engine() { return engine_; }
  TransferService& transfers() { return transfers_; }
  DataScheduler& data() { return *data_; }
  const ResourceMap& resources() const { return res_; }

  /// Invariant violations at the current instant (empty when consistent).
  std::vector<std::string> check_invariants() const;

 private:
  void submit(std::size_t j);
  void reject(std::size_t j, ErrorCode code);
  std::optional<ErrorCode> admission_error(const JobRun& job) const;
  bool uses_distributed_fs(const JobSpec& spec) const;
  void gate_or_queue(std::size_t j);
  void poke();
  void scheduling_pass();
  std::vector<PlanJob> plan_queue(std::size_t limit) const;
  void audit_catalogue() const;
  PlanInput plan_input(std::size_t limit = std::numeric_limits<std::size_t>::max()) const;
  SimDuration plan_duration(const JobRun& job) const;
  std::vector<int> ranked(const JobRun& job, const std::vector<int>& nodes) const;
  bool ready_now(const JobRun& job, int node) const;
  Bytes absorbable(const JobRun& job, int node) const;
  Bytes charge(const JobRun& job, int node) const;

  void allocate(std::size_t j, const std::vector<int>& nodes);
  void begin_switch(int node, MemoryMode mode, Fields tags, std::function<void()> done);
  void ready(std::size_t j);
  void launch(std::size_t j);
  void advance(std::size_t j);
  void run_block(std::size_t j, std::vector<FlowPlan> flows);
  void fail(std::size_t j, std::string_view status, std::string_view reason);
  void complete_job(std::size_t j, std::string_view status, std::string_view reason);
  void finish(std::size_t j);

  std::vector<FlowPlan> read_block(std::size_t j);
  std::vector<FlowPlan> phase_block(std::size_t j, std::size_t phase);
  std::vector<FlowPlan> output_block(std::size_t j);
  struct Placement {
    ReplicaId replica = 0;
    int host = -1;
    Tier tier = Tier::external_fs;
  };
  Placement place_write(JobRun& job, const std::string& dataset, Tier tier, int node, Bytes bytes);
  bool shared_in_workflow(const JobSpec& spec, std::string_view dataset) const;
  SimDuration retention_ttl(const JobSpec& spec) const;

  void observe();
  void record_occupancy();

  ClusterSpec cluster_;
  WorkloadSpec workload_;
  SimOptions options_;
  Engine engine_;
  TransferService transfers_;
  ClusterState state_;
  ResourceMap res_;
  std::unique_ptr<DataScheduler> data_;

  std::vector<JobRun> jobs_;
  std::map<std::string, std::size_t, std::less<>> job_index_;
  std::map<std::string, const WorkflowSpec*, std::less<>> workflows_;
  std::vector<std::size_t> queue_;  // submission order, gated and queued jobs
  std::size_t finished_ = 0;
  bool pass_pending_ = false;
  bool waiting_ = false;
  BackfillAudit audit_;
  std::vector<OccupancySample> occupancy_;
  std::vector<Bytes> last_used_;
  std::vector<SimTime> switch_end_;
  std::size_t trace_seen_ = 0;
  BytesPerSecond min_node_bw_ = 0;
};

}  // namespace nvsim
