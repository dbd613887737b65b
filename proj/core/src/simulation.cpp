#include "nvsim/simulation.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "nvsim/error.hpp"

namespace nvsim {

struct FlowPlan {
  ResourceMap::Path path;
  Bytes bytes = 0;
  Fields info;
  std::optional<ReplicaId> source;  // replica being read
  std::optional<ReplicaId> target;  // replica being written
};

namespace {

enum StepKind { kCompute = 0, kRead = 1, kPhase = 2, kOutputs = 3 };

Bytes share_of(Bytes total, std::size_t parts, std::size_t i) {
  return total / parts + (i < total % parts ? 1 : 0);
}

std::string join(const std::vector<int>& v) {
  return fmt::format("{}", fmt::join(v, ","));
}

std::string_view tier_label(ReplicaTier t) {
  switch (t) {
    case ReplicaTier::external_fs: return "external-fs";
    case ReplicaTier::node_bapm: return "local-fs";
    case ReplicaTier::distributed_fs: return "distributed-fs";
  }
  return "?";
}

SimDuration ceil_transfer(unsigned __int128 bytes, BytesPerSecond bw) {
  if (bw == 0 || bytes == 0) return SimDuration{0};
  const unsigned __int128 num = bytes * 1'000'000'000u;
  return SimDuration{static_cast<std::int64_t>((num + bw - 1) / bw)};
}

}  // namespace

std::string_view to_string(JobPhase p) {
  switch (p) {
    case JobPhase::pending: return "pending";
    case JobPhase::rejected: return "rejected";
    case JobPhase::gated: return "gated";
    case JobPhase::queued: return "queued";
    case JobPhase::allocated: return "allocated";
    case JobPhase::staging: return "staging";
    case JobPhase::running: return "running";
    case JobPhase::finishing: return "finishing";
    case JobPhase::done: return "done";
  }
  return "?";
}

Simulation::Simulation(ClusterSpec cluster, WorkloadSpec workload, SimOptions options)
    : cluster_(std::move(cluster)),
      workload_(std::move(workload)),
      options_(std::move(options)),
      transfers_(engine_),
      state_(cluster_) {
  validate_cluster(cluster_).throw_if_failed();
  validate_workload(workload_);
  validate_workload_against(workload_, cluster_);
  validate_policy(options_.policy);

  res_ = ResourceMap(transfers_, cluster_);
  data_ = std::make_unique<DataScheduler>(engine_, transfers_, state_, res_);
  switch_end_.assign(state_.node_count(), SimTime{});
  last_used_.assign(state_.node_count(), 0);

  min_node_bw_ = 0;
  for (const NodeSpec& n : cluster_.nodes) {
    BytesPerSecond bw = n.link_bw;
    if (n.has_bapm() && n.bapm_bw > 0) bw = std::min(bw, n.bapm_bw);
    min_node_bw_ = min_node_bw_ == 0 ? bw : std::min(min_node_bw_, bw);
  }

  for (const WorkflowSpec& w : workload_.workflows) workflows_[w.id] = &w;
  for (const Grant& g : workload_.grants) {
    for (const std::string& p : g.principals) state_.grant(g.owner, p);
  }
  for (const DataSetSpec& d : workload_.datasets) {
    state_.add_dataset(DataSet{d.id, d.size, d.owner, d.workflow, false});
    Replica r;
    r.dataset = d.id;
    r.bytes = d.size;
    r.state = ReplicaState::resident;
    if (d.node) {
      r.tier = ReplicaTier::node_bapm;
      r.node = *d.node;
      const ReplicaId id = state_.add_replica(std::move(r));
      auto wf = workflows_.find(d.workflow);
      data_->retain(id, kSimEpoch + (wf != workflows_.end() ? wf->second->retention_ttl : SimDuration{std::chrono::hours{24}}));
    } else {
      state_.add_replica(std::move(r));
    }
  }

  jobs_.reserve(workload_.jobs.size());
  for (std::size_t i = 0; i < workload_.jobs.size(); ++i) {
    JobRun run;
    run.spec = workload_.jobs[i];
    run.index = i;
    job_index_[run.spec.job_id] = i;
    for (const OutputSpec& o : run.spec.outputs) {
      state_.add_dataset(DataSet{o.id, o.bytes, run.spec.owner, run.spec.workflow_id, false});
    }
    jobs_.push_back(std::move(run));
  }
  for (const WorkflowSpec& w : workload_.workflows) {
    for (const auto& [job, deps] : w.dependencies) {
      for (const std::string& d : deps) jobs_[job_index_.at(d)].successors.push_back(job_index_.at(job));
    }
  }

  engine_.add_observer([this] { observe(); });
  record_occupancy();

  for (std::size_t i = 0; i < jobs_.size(); ++i) {
    const JobSpec& s = jobs_[i].spec;
    engine_.schedule(s.submit_time, EventKind::submit,
                     Fields{{"job", s.job_id},
                            {"owner", s.owner},
                            {"workflow", s.workflow_id.empty() ? "-" : s.workflow_id},
                            {"nodes", std::to_string(s.nodes_requested)}},
                     [this, i] { submit(i); });
  }
}

Simulation::~Simulation() = default;

void Simulation::run(std::optional<SimTime> until) {
  engine_.run(until);
  audit_catalogue();
}

void Simulation::run_until_jobs_done() {
  while (!all_jobs_done() && !engine_.idle()) {
    engine_.run(engine_.next_time());
  }
  audit_catalogue();
}

void Simulation::audit_catalogue() const {
  if (!options_.check_invariants) return;
  const auto problems = state_.audit();
  if (!problems.empty()) {
    throw SimError(ErrorCode::InvariantViolation,
                   fmt::format("at {} ns: {}", to_ns(engine_.now()), fmt::join(problems, "; ")));
  }
}

bool Simulation::all_jobs_done() const { return finished_ == jobs_.size(); }

// ---------------------------------------------------------------- admission

bool Simulation::uses_distributed_fs(const JobSpec& spec) const {
  if (spec.stage_inputs == StageMode::distributed_fs) return true;
  for (const IoPhase& p : spec.io_phases) {
    if (p.tier == Tier::distributed_fs) return true;
  }
  for (const OutputSpec& o : spec.outputs) {
    if (o.tier == Tier::distributed_fs) return true;
  }
  return false;
}

bool Simulation::shared_in_workflow(const JobSpec& spec, std::string_view dataset) const {
  auto it = workflows_.find(spec.workflow_id);
  if (it == workflows_.end()) return false;
  const auto& shared = it->second->shared_datasets;
  return std::find(shared.begin(), shared.end(), dataset) != shared.end();
}

SimDuration Simulation::retention_ttl(const JobSpec& spec) const {
  auto it = workflows_.find(spec.workflow_id);
  return it == workflows_.end() ? SimDuration{std::chrono::hours{24}} : it->second->retention_ttl;
}

std::optional<ErrorCode> Simulation::admission_error(const JobRun& job) const {
  const JobSpec& s = job.spec;
  for (const std::string& d : s.inputs) {
    if (!state_.may_access(s.owner, state_.dataset(d))) return ErrorCode::AccessDenied;
  }
  if (s.required_mode == MemoryMode::DLM) {
    if (s.stage_inputs != StageMode::none) return ErrorCode::InfeasibleRequest;
    for (const IoPhase& p : s.io_phases) {
      if (p.tier != Tier::external_fs) return ErrorCode::InfeasibleRequest;
    }
    for (const OutputSpec& o : s.outputs) {
      if (o.tier != Tier::external_fs) return ErrorCode::InfeasibleRequest;
    }
  }
  const std::size_t k = s.nodes_requested;
  unsigned __int128 local = 0;
  for (const IoPhase& p : s.io_phases) {
    if (p.direction == Direction::write && p.tier == Tier::local_fs) local += (p.bytes + k - 1) / k;
  }
  for (const OutputSpec& o : s.outputs) {
    if (o.tier == Tier::local_fs) local += o.bytes;
  }
  if (local > s.bapm_bytes_per_node) return ErrorCode::InfeasibleRequest;
  if (job.eligible.size() < k) return ErrorCode::InfeasibleRequest;
  return std::nullopt;
}

void Simulation::submit(std::size_t j) {
  JobRun& job = jobs_[j];
  const JobSpec& s = job.spec;
  const bool slm = s.required_mode == MemoryMode::SLM;
  if (slm && s.stage_inputs == StageMode::local_fs) job.staged_inputs = s.inputs;

  unsigned __int128 staged_local = 0;
  for (const std::string& d : job.staged_inputs) staged_local += state_.dataset(d).bytes;
  for (std::size_t n = 0; n < state_.node_count(); ++n) {
    const NodeSpec& spec = state_.node(static_cast<int>(n)).spec;
    bool ok;
    if (slm) {
      ok = (s.bapm_bytes_per_node == 0 && staged_local == 0) ||
           (spec.has_bapm() && spec.bapm_bytes() >= staged_local + s.bapm_bytes_per_node);
    } else {
      ok = supports_dlm(spec) && spec.bapm_bytes() >= s.bapm_bytes_per_node;
    }
    if (ok) job.eligible.push_back(static_cast<int>(n));
  }

  unsigned __int128 staged = 0;
  if (slm && s.stage_inputs != StageMode::none) {
    for (const std::string& d : s.inputs) staged += state_.dataset(d).bytes;
  }
  const unsigned __int128 per_node = s.stage_inputs == StageMode::local_fs ? staged : (staged + s.nodes_requested - 1) / s.nodes_requested;
  job.stage_estimate = std::max(ceil_transfer(staged, cluster_.external_fs_bw), ceil_transfer(per_node, min_node_bw_));

  if (auto err = admission_error(job)) {
    reject(j, *err);
    return;
  }
  gate_or_queue(j);
  queue_.push_back(j);
  poke();
}

void Simulation::reject(std::size_t j, ErrorCode code) {
  JobRun& job = jobs_[j];
  engine_.emit(EventKind::reject, Fields{{"job", job.spec.job_id}, {"reason", std::string(to_string(code))}});
  job.phase = JobPhase::rejected;
  job.end_status = "rejected";
  finish(j);
}

void Simulation::gate_or_queue(std::size_t j) {
  JobRun& job = jobs_[j];
  job.waiting_on = 0;
  auto wf = workflows_.find(job.spec.workflow_id);
  if (wf != workflows_.end()) {
    auto deps = wf->second->dependencies.find(job.spec.job_id);
    if (deps != wf->second->dependencies.end()) {
      for (const std::string& d : deps->second) {
        if (jobs_[job_index_.at(d)].phase != JobPhase::done) ++job.waiting_on;
      }
    }
  }
  job.phase = job.waiting_on > 0 ? JobPhase::gated : JobPhase::queued;
}

// --------------------------------------------------------------- scheduling

void Simulation::poke() {
  if (pass_pending_) return;
  pass_pending_ = true;
  engine_.late_timer(engine_.now(), [this] { scheduling_pass(); });
}

Bytes Simulation::absorbable(const JobRun& job, int node) const {
  if (job.spec.workflow_id.empty()) return 0;
  unsigned __int128 sum = 0;
  for (ReplicaId id : state_.replicas_on(node)) {
    const Replica& r = state_.replica(id);
    if (!r.expiry || r.holder_job >= 0 || r.state != ReplicaState::resident || r.tier != ReplicaTier::node_bapm) continue;
    if (std::find(job.staged_inputs.begin(), job.staged_inputs.end(), r.dataset) != job.staged_inputs.end()) continue;
    const DataSet& ds = state_.dataset(r.dataset);
    if (ds.workflow == job.spec.workflow_id || shared_in_workflow(job.spec, r.dataset)) sum += r.bytes;
  }
  return static_cast<Bytes>(std::min<unsigned __int128>(sum, job.spec.bapm_bytes_per_node));
}

Bytes Simulation::charge(const JobRun& job, int node) const {
  unsigned __int128 c = job.spec.bapm_bytes_per_node - absorbable(job, node);
  for (const std::string& d : job.staged_inputs) {
    if (!state_.resident_on(d, node)) c += state_.dataset(d).bytes;
  }
  return c > std::numeric_limits<Bytes>::max() ? std::numeric_limits<Bytes>::max() : static_cast<Bytes>(c);
}

bool Simulation::ready_now(const JobRun& job, int node) const {
  const NodeState& ns = state_.node(node);
  if (ns.job >= 0 || ns.switching) return false;
  if (ns.mode == job.spec.required_mode) return ns.free_bapm() >= charge(job, node);
  if (res_.has_bapm(node) && transfers_.network().flows_on(res_.bapm(node)) > 0) return false;
  return true;
}

std::vector<int> Simulation::ranked(const JobRun& job, const std::vector<int>& nodes) const {
  return score_nodes(describe_candidates(state_, nodes, job.spec.inputs, job.spec.required_mode), options_.policy.scorer,
                     options_.policy.weights);
}

SimDuration Simulation::plan_duration(const JobRun& job) const {
  bool switch_possible = false;
  for (const NodeState& ns : state_.nodes()) {
    if (ns.mode != job.spec.required_mode) switch_possible = true;
  }
  if (!switch_possible) {
    for (const JobRun& other : jobs_) {
      if (other.phase == JobPhase::done || other.phase == JobPhase::rejected || other.phase == JobPhase::pending) continue;
      if (other.spec.required_mode != job.spec.required_mode) {
        switch_possible = true;
        break;
      }
    }
  }
  return job.spec.walltime_limit + job.stage_estimate + (switch_possible ? cluster_.mode_switch_seconds : SimDuration{0});
}

std::vector<PlanJob> Simulation::plan_queue(std::size_t limit) const {
  std::vector<PlanJob> out;
  const std::size_t depth = std::min(
      limit, options_.policy.queueing == Queueing::fcfs ? queue_.size() : options_.policy.max_backfill_depth);
  for (std::size_t j : queue_) {
    if (out.size() >= depth) break;
    const JobRun& job = jobs_[j];
    if (job.phase != JobPhase::queued) continue;
    PlanJob p;
    p.job = static_cast<int>(j);
    p.nodes = job.spec.nodes_requested;
    p.duration = plan_duration(job);
    p.eligible = ranked(job, job.eligible);
    for (int n : p.eligible) {
      if (ready_now(job, n)) p.ready_now.push_back(n);
    }
    out.push_back(std::move(p));
  }
  return out;
}

PlanInput Simulation::plan_input(std::size_t limit) const {
  PlanInput in;
  in.now = engine_.now();
  in.queueing = options_.policy.queueing;
  in.max_depth = options_.policy.max_backfill_depth;
  for (std::size_t n = 0; n < state_.node_count(); ++n) {
    const NodeState& ns = state_.node(static_cast<int>(n));
    if (ns.job >= 0) {
      const JobRun& job = jobs_[static_cast<std::size_t>(ns.job)];
      SimTime end;
      if (job.launched) {
        end = job.start_time + job.spec.walltime_limit;
      } else {
        const SimDuration sw = job.switched ? cluster_.mode_switch_seconds : SimDuration{0};
        end = std::max(job.alloc_time + sw + job.stage_estimate, in.now) + job.spec.walltime_limit;
      }
      in.busy.push_back(BusyNode{static_cast<int>(n), end});
    } else if (ns.switching) {
      in.busy.push_back(BusyNode{static_cast<int>(n), switch_end_[n]});
    }
  }
  in.queue = plan_queue(limit);
  return in;
}

void Simulation::scheduling_pass() {
  pass_pending_ = false;
  ++audit_.passes;
  std::erase_if(queue_, [this](std::size_t j) {
    return jobs_[j].phase != JobPhase::gated && jobs_[j].phase != JobPhase::queued;
  });
  std::optional<std::size_t> head;
  for (std::size_t j : queue_) {
    if (jobs_[j].phase == JobPhase::queued) {
      head = j;
      break;
    }
  }
  if (!head) {
    waiting_ = false;
    return;
  }

  const PlanInput input = plan_input();
  const std::vector<Reservation> plan = plan_schedule(input);
  std::optional<SimTime> head_start;
  for (const Reservation& r : plan) {
    if (r.job == static_cast<int>(*head)) head_start = r.start;
  }

  bool ahead = false;
  for (const Reservation& r : plan) {
    if (r.start != input.now) continue;
    const auto j = static_cast<std::size_t>(r.job);
    if (jobs_[j].phase != JobPhase::queued) continue;
    if (j != *head && jobs_[*head].phase == JobPhase::queued) ahead = true;
    allocate(j, r.nodes);
  }

  if (options_.policy.queueing == Queueing::fcfs_backfill && jobs_[*head].phase == JobPhase::queued && head_start) {
    if (ahead) ++audit_.decisions;
    const std::vector<Reservation> after = plan_schedule(plan_input(1));
    for (const Reservation& r : after) {
      if (r.job != static_cast<int>(*head)) continue;
      if (r.start > *head_start) {
        ++audit_.head_delays;
        spdlog::warn("backfill moved job {} from {} ns to {} ns", jobs_[*head].spec.job_id, to_ns(*head_start),
                     to_ns(r.start));
      }
    }
  }

  waiting_ = std::any_of(queue_.begin(), queue_.end(), [this](std::size_t j) { return jobs_[j].phase == JobPhase::queued; });
}

// ---------------------------------------------------------------- lifecycle

void Simulation::begin_switch(int node, MemoryMode mode, Fields tags, std::function<void()> done) {
  NodeState& ns = state_.node(node);
  Fields start = tags;
  start.add("node", node).add("from", std::string(to_string(ns.mode))).add("to", std::string(to_string(mode)));
  engine_.emit(EventKind::mode_switch_start, start);
  data_->scrub_node(node, "mode_switch", tags);
  ns.switching = true;
  const SimTime end = engine_.now() + cluster_.mode_switch_seconds;
  switch_end_[static_cast<std::size_t>(node)] = end;
  Fields fin = std::move(tags);
  fin.add("node", node).add("mode", std::string(to_string(mode)));
  engine_.schedule(end, EventKind::mode_switch_end, std::move(fin), [this, node, mode, done = std::move(done)] {
    NodeState& s = state_.node(node);
    s.mode = mode;
    s.switching = false;
    ++s.mode_switches;
    if (done) done();
  });
}

SimTime Simulation::set_mode(int node, MemoryMode mode) {
  NodeState& ns = state_.node(node);
  if (ns.job >= 0 || ns.switching) throw SimError(ErrorCode::NodeBusy, fmt::format("node {} is in use", node));
  if (res_.has_bapm(node) && transfers_.network().flows_on(res_.bapm(node)) > 0) {
    throw SimError(ErrorCode::NodeBusy, fmt::format("node {} has transfers in flight", node));
  }
  if (mode == MemoryMode::DLM && !supports_dlm(ns.spec)) {
    throw SimError(ErrorCode::DlmRequiresDram, fmt::format("node {} cannot run in DLM", node));
  }
  if (mode == ns.mode) {
    const std::string m(to_string(mode));
    engine_.emit(EventKind::mode_switch_start, Fields{{"node", std::to_string(node)}, {"from", m}, {"to", m}, {"noop", "1"}});
    engine_.emit(EventKind::mode_switch_end, Fields{{"node", std::to_string(node)}, {"mode", m}, {"noop", "1"}});
    return engine_.now();
  }
  begin_switch(node, mode, {}, [this] { poke(); });
  return engine_.now() + cluster_.mode_switch_seconds;
}

void Simulation::allocate(std::size_t j, const std::vector<int>& chosen) {
  JobRun& job = jobs_[j];
  job.nodes = chosen;
  std::sort(job.nodes.begin(), job.nodes.end());
  job.phase = JobPhase::allocated;
  job.alloc_time = engine_.now();
  const JobSpec& s = job.spec;

  std::vector<int> switching;
  for (int n : job.nodes) {
    NodeState& ns = state_.node(n);
    ns.job = static_cast<int>(j);
    if (ns.mode != s.required_mode) {
      switching.push_back(n);
      continue;
    }
    Bytes absorbed = 0;
    const Bytes limit = absorbable(job, n);
    if (limit > 0) {
      for (ReplicaId id : state_.replicas_on(n)) {
        Replica& r = state_.replica(id);
        if (!r.expiry || r.holder_job >= 0 || r.state != ReplicaState::resident || r.tier != ReplicaTier::node_bapm) continue;
        if (std::find(job.staged_inputs.begin(), job.staged_inputs.end(), r.dataset) != job.staged_inputs.end()) continue;
        const DataSet& ds = state_.dataset(r.dataset);
        if (ds.workflow != s.workflow_id && !shared_in_workflow(s, r.dataset)) continue;
        r.holder_job = static_cast<int>(j);
        job.held.push_back(id);
      }
      absorbed = limit;
    }
    ns.reserved = s.bapm_bytes_per_node - absorbed;
  }

  engine_.emit(EventKind::allocate, Fields{{"job", s.job_id},
                                           {"nodes", join(job.nodes)},
                                           {"mode", std::string(to_string(s.required_mode))},
                                           {"switches", std::to_string(switching.size())}});
  job.switched = !switching.empty();
  job.pending_switches = switching.size();
  for (int n : switching) {
    begin_switch(n, s.required_mode, Fields{{"job", s.job_id}}, [this, j, gen = job.generation] {
      JobRun& jr = jobs_[j];
      if (jr.generation != gen) return;
      if (--jr.pending_switches == 0) ready(j);
    });
    state_.node(n).reserved = s.bapm_bytes_per_node;
  }
  if (switching.empty()) ready(j);
}

void Simulation::ready(std::size_t j) {
  JobRun& job = jobs_[j];
  const JobSpec& s = job.spec;
  job.phase = JobPhase::staging;

  for (const std::string& d : s.inputs) {
    bool found = false;
    for (ReplicaId id : state_.replicas_of(d)) {
      if (state_.replica(id).state == ReplicaState::resident) found = true;
    }
    if (!found) {
      fail(j, "failed", "missing_input");
      return;
    }
  }

  const bool slm = s.required_mode == MemoryMode::SLM;
  if (slm && uses_distributed_fs(s)) {
    std::vector<int> members;
    for (int n : job.nodes) {
      if (state_.node(n).spec.has_bapm()) members.push_back(n);
    }
    if (!members.empty()) {
      const DistributedFs& fs = mount_distributed_fs(state_, static_cast<int>(j), members);
      job.fs = fs.id;
      engine_.emit(EventKind::fs_mount, Fields{{"job", s.job_id},
                                               {"fs", std::to_string(fs.id)},
                                               {"members", join(members)},
                                               {"capacity", std::to_string(fs.capacity())}});
    }
  }

  const std::uint64_t gen = job.generation;
  auto staged = [this, j, gen](ReplicaId) {
    JobRun& jr = jobs_[j];
    if (jr.generation != gen) return;
    if (--jr.pending_stage_ins == 0 && !jr.launched) launch(j);
  };
  auto track = [&](ReplicaId id, bool existed) {
    Replica& r = state_.replica(id);
    if (existed) {
      if (r.holder_job < 0) {
        r.holder_job = static_cast<int>(j);
        job.held.push_back(id);
      }
    } else {
      r.holder_job = static_cast<int>(j);
      job.staged_created.push_back(id);
    }
  };

  if (slm && s.stage_inputs == StageMode::local_fs) {
    for (const std::string& d : s.inputs) {
      for (int n : job.nodes) {
        const bool existed = state_.resident_on(d, n).has_value();
        try {
          const ReplicaId id = data_->stage_in(d, s.owner, {n, -1}, Fields{{"job", s.job_id}}, staged);
          track(id, existed);
          ++job.pending_stage_ins;
        } catch (const SimError& e) {
          if (e.code() != ErrorCode::TierFull && e.code() != ErrorCode::InsufficientCapacity) throw;
        }
      }
    }
  } else if (slm && s.stage_inputs == StageMode::distributed_fs && job.fs >= 0) {
    const DistributedFs& fs = state_.fs(job.fs);
    for (const std::string& d : s.inputs) {
      const bool on_member = std::any_of(fs.members.begin(), fs.members.end(),
                                         [&](int m) { return state_.resident_on(d, m).has_value(); });
      if (on_member) continue;
      try {
        const int host = place_on_distributed_fs(state_, job.fs, state_.dataset(d).bytes);
        const ReplicaId id = data_->stage_in(d, s.owner, {host, job.fs}, Fields{{"job", s.job_id}}, staged);
        track(id, false);
        ++job.pending_stage_ins;
      } catch (const SimError& e) {
        if (e.code() != ErrorCode::TierFull && e.code() != ErrorCode::InsufficientCapacity) throw;
      }
    }
  }
  if (job.pending_stage_ins == 0 || options_.launch_before_stage_in) launch(j);
}

void Simulation::launch(std::size_t j) {
  JobRun& job = jobs_[j];
  const JobSpec& s = job.spec;
  job.launched = true;
  job.phase = JobPhase::running;
  job.start_time = engine_.now();

  std::vector<std::string> modes;
  for (int n : job.nodes) modes.emplace_back(to_string(state_.node(n).mode));
  Fields f{{"job", s.job_id}, {"nodes", join(job.nodes)}, {"modes", fmt::format("{}", fmt::join(modes, ","))}};
  if (s.required_mode == MemoryMode::DLM) {
    f.add("latency_ns", fmt::format("{:.3f}", effective_latency_ns(state_.node(job.nodes.front()).spec, s.dlm_hit_rate)));
  }
  engine_.emit(EventKind::job_start, std::move(f));

  const std::uint64_t gen = job.generation;
  engine_.late_timer(job.start_time + s.walltime_limit, [this, j, gen] {
    JobRun& jr = jobs_[j];
    if (jr.generation != gen || jr.phase != JobPhase::running) return;
    complete_job(j, "killed", "walltime");
  });

  job.steps.clear();
  job.step = 0;
  job.steps.emplace_back(kRead, 0);
  std::vector<std::size_t> order(s.io_phases.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s.io_phases[a].offset < s.io_phases[b].offset; });
  SimDuration done{0};
  for (std::size_t i : order) {
    const SimDuration at = s.io_phases[i].offset;
    if (at > done) job.steps.emplace_back(kCompute, to_ns(at - done));
    done = std::max(done, at);
    job.steps.emplace_back(kPhase, static_cast<std::int64_t>(i));
  }
  if (s.compute_seconds > done) job.steps.emplace_back(kCompute, to_ns(s.compute_seconds - done));
  job.steps.emplace_back(kOutputs, 0);
  advance(j);
}

void Simulation::advance(std::size_t j) {
  JobRun& job = jobs_[j];
  if (job.phase != JobPhase::running) return;
  if (job.step >= job.steps.size()) {
    complete_job(j, "completed", "");
    return;
  }
  const auto [kind, arg] = job.steps[job.step++];
  try {
    switch (kind) {
      case kCompute: {
        const std::uint64_t gen = job.generation;
        engine_.timer(engine_.now() + SimDuration{arg}, [this, j, gen] {
          if (jobs_[j].generation == gen) advance(j);
        });
        return;
      }
      case kRead: run_block(j, read_block(j)); return;
      case kPhase: run_block(j, phase_block(j, static_cast<std::size_t>(arg))); return;
      case kOutputs: run_block(j, output_block(j)); return;
      default: return;
    }
  } catch (const SimError& e) {
    if (e.code() == ErrorCode::UnknownDataset) {
      fail(j, "failed", "missing_input");
    } else if (e.code() == ErrorCode::TierFull) {
      fail(j, "failed", "TierFull");
    } else {
      throw;
    }
  }
}

std::vector<FlowPlan> Simulation::read_block(std::size_t j) {
  JobRun& job = jobs_[j];
  const JobSpec& s = job.spec;
  std::vector<FlowPlan> flows;
  const std::size_t k = job.nodes.size();
  for (const std::string& d : s.inputs) {
    const Bytes total = state_.dataset(d).bytes;
    for (std::size_t i = 0; i < k; ++i) {
      const Bytes bytes = share_of(total, k, i);
      if (bytes == 0) continue;
      const int node = job.nodes[i];
      const AccessPath ap = data_->resolve_access(s.owner, d, node);
      const Replica& src = state_.replica(ap.replica);
      FlowPlan f;
      f.bytes = bytes;
      f.source = ap.replica;
      switch (ap.kind) {
        case AccessPath::Kind::local: f.path = res_.local(node); break;
        case AccessPath::Kind::remote_bapm: f.path = res_.bapm_access(ap.node, node); break;
        case AccessPath::Kind::external: f.path = res_.external_io(node); break;
      }
      const std::string path = ap.kind == AccessPath::Kind::local         ? "local"
                               : ap.kind == AccessPath::Kind::remote_bapm ? "remote-bapm"
                                                                          : "external";
      f.info = Fields{{"job", s.job_id},
                      {"block", "read"},
                      {"phase", "-"},
                      {"node", std::to_string(node)},
                      {"dir", "read"},
                      {"tier", std::string(tier_label(src.tier))},
                      {"path", path},
                      {"src", ap.kind == AccessPath::Kind::external ? "external" : fmt::format("node:{}", ap.node)},
                      {"dataset", d},
                      {"bytes", std::to_string(bytes)}};
      flows.push_back(std::move(f));
    }
  }
  return flows;
}

Simulation::Placement Simulation::place_write(JobRun& job, const std::string& dataset, Tier tier, int node, Bytes bytes) {
  Replica r;
  r.dataset = dataset;
  r.bytes = bytes;
  r.state = ReplicaState::staging;
  if (tier == Tier::local_fs) {
    const NodeState& ns = state_.node(node);
    if (ns.spec.has_bapm() && ns.mode == MemoryMode::SLM && ns.job == static_cast<int>(job.index) &&
        static_cast<unsigned __int128>(ns.reservation_bytes) + bytes <= ns.reserved) {
      r.tier = ReplicaTier::node_bapm;
      r.node = node;
      r.reservation_job = static_cast<int>(job.index);
      return Placement{state_.add_replica(std::move(r)), node, Tier::local_fs};
    }
  } else if (tier == Tier::distributed_fs && job.fs >= 0) {
    try {
      const int host = place_on_distributed_fs(state_, job.fs, bytes);
      Replica d = r;
      d.tier = ReplicaTier::distributed_fs;
      d.node = host;
      d.fs = job.fs;
      return Placement{state_.add_replica(std::move(d)), host, Tier::distributed_fs};
    } catch (const SimError& e) {
      if (e.code() != ErrorCode::TierFull && e.code() != ErrorCode::InsufficientCapacity) throw;
    }
  }
  r.tier = ReplicaTier::external_fs;
  return Placement{state_.add_replica(std::move(r)), -1, Tier::external_fs};
}

std::vector<FlowPlan> Simulation::phase_block(std::size_t j, std::size_t index) {
  JobRun& job = jobs_[j];
  const JobSpec& s = job.spec;
  const IoPhase& p = s.io_phases[index];
  const std::size_t k = job.nodes.size();
  std::vector<FlowPlan> flows;
  for (std::size_t i = 0; i < k; ++i) {
    const Bytes bytes = share_of(p.bytes, k, i);
    if (bytes == 0) continue;
    const int node = job.nodes[i];
    FlowPlan f;
    f.bytes = bytes;
    std::string dataset = "-";
    Tier placed = p.tier;
    std::string src;
    if (p.direction == Direction::write) {
      dataset = fmt::format("{}:p{}:n{}", s.job_id, index, node);
      if (!state_.find_dataset(dataset)) state_.add_dataset(DataSet{dataset, bytes, s.owner, "", true});
      const Placement at = place_write(job, dataset, p.tier, node, bytes);
      placed = at.tier;
      f.target = at.replica;
      job.writing[at.replica] = 1;
      if (placed != Tier::external_fs) job.scratch.push_back(at.replica);
      if (placed == Tier::local_fs) {
        f.path = res_.local(node);
      } else if (placed == Tier::distributed_fs) {
        f.path = res_.bapm_access(at.host, node);
      } else {
        f.path = res_.external_io(node);
      }
      src = placed == Tier::external_fs ? "external" : fmt::format("node:{}", at.host);
    } else {
      int host = -1;
      if (p.tier == Tier::local_fs && res_.has_bapm(node)) {
        host = node;
      } else if (p.tier == Tier::distributed_fs && job.fs >= 0) {
        const auto& members = state_.fs(job.fs).members;
        host = members[i % members.size()];
      }
      if (host < 0) {
        placed = Tier::external_fs;
        f.path = res_.external_io(node);
        src = "external";
      } else {
        f.path = res_.bapm_access(host, node);
        src = fmt::format("node:{}", host);
      }
    }
    const bool remote = placed != Tier::external_fs && src != fmt::format("node:{}", node);
    f.info = Fields{{"job", s.job_id},
                    {"block", fmt::format("p{}", index)},
                    {"phase", std::to_string(index)},
                    {"node", std::to_string(node)},
                    {"dir", std::string(to_string(p.direction))},
                    {"tier", std::string(to_string(placed))},
                    {"path", placed == Tier::external_fs ? "external" : (remote ? "remote-bapm" : "local")},
                    {"src", src},
                    {"dataset", dataset},
                    {"bytes", std::to_string(bytes)}};
    flows.push_back(std::move(f));
  }
  return flows;
}

std::vector<FlowPlan> Simulation::output_block(std::size_t j) {
  JobRun& job = jobs_[j];
  const JobSpec& s = job.spec;
  const std::size_t k = job.nodes.size();
  std::vector<FlowPlan> flows;
  for (std::size_t oi = 0; oi < s.outputs.size(); ++oi) {
    const OutputSpec& o = s.outputs[oi];
    const Placement at = place_write(job, o.id, o.tier, job.nodes.front(), o.bytes);
    job.output_replicas[oi] = at.replica;
    std::size_t chunks = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const Bytes bytes = share_of(o.bytes, k, i);
      if (bytes == 0) continue;
      const int node = job.nodes[i];
      FlowPlan f;
      f.bytes = bytes;
      f.target = at.replica;
      std::string path = "external";
      if (at.tier == Tier::external_fs) {
        f.path = res_.external_io(node);
      } else {
        f.path = res_.bapm_access(at.host, node);
        path = at.host == node ? "local" : "remote-bapm";
      }
      f.info = Fields{{"job", s.job_id},
                      {"block", "out"},
                      {"phase", "-"},
                      {"node", std::to_string(node)},
                      {"dir", "write"},
                      {"tier", std::string(to_string(at.tier))},
                      {"path", path},
                      {"src", at.tier == Tier::external_fs ? "external" : fmt::format("node:{}", at.host)},
                      {"dataset", o.id},
                      {"bytes", std::to_string(bytes)}};
      flows.push_back(std::move(f));
      ++chunks;
    }
    if (chunks == 0) {
      state_.replica(at.replica).state = ReplicaState::resident;
    } else {
      job.writing[at.replica] = chunks;
    }
  }
  return flows;
}

void Simulation::run_block(std::size_t j, std::vector<FlowPlan> flows) {
  JobRun& job = jobs_[j];
  if (flows.empty()) {
    advance(j);
    return;
  }
  flow::FlowNetwork ideal = transfers_.network().empty_copy();
  for (const FlowPlan& f : flows) ideal.add(0, f.path, f.bytes, fs_overhead_cap(state_, res_, f.path));
  flow::FineTime last = 0;
  for (const flow::Completion& c : ideal.advance_to(flow::FineTime{1} << 100)) last = std::max(last, c.at);
  const std::string ideal_ns = std::to_string(flow::ceil_ns(last));

  const std::uint64_t gen = job.generation;
  for (FlowPlan& f : flows) {
    f.info.add("ideal_ns", ideal_ns);
    if (f.source) ++state_.replica(*f.source).readers;
    engine_.emit(EventKind::io_start, f.info);
    auto undo = [this, source = f.source] {
      if (!source) return;
      if (Replica* r = state_.find_replica(*source)) {
        --r->readers;
        data_->release(*source);
      }
    };
    const auto cap = fs_overhead_cap(state_, res_, f.path);
    const auto id = transfers_.start(
        f.path, f.bytes,
        [this, j, gen, info = f.info, target = f.target](TransferService::TransferId tid) {
          JobRun& jr = jobs_[j];
          if (jr.generation != gen) return;
          auto it = jr.flows.find(tid);
          if (it != jr.flows.end()) {
            it->second();
            jr.flows.erase(it);
          }
          if (target) {
            auto w = jr.writing.find(*target);
            if (w != jr.writing.end() && --w->second == 0) {
              jr.writing.erase(w);
              state_.replica(*target).state = ReplicaState::resident;
            }
          }
          engine_.emit(EventKind::io_end, info);
          if (jr.flows.empty()) advance(j);
        },
        cap);
    job.flows.emplace(id, std::move(undo));
  }
}

void Simulation::fail(std::size_t j, std::string_view status, std::string_view reason) { complete_job(j, status, reason); }

void Simulation::complete_job(std::size_t j, std::string_view status, std::string_view reason) {
  JobRun& job = jobs_[j];
  const JobSpec& s = job.spec;
  ++job.generation;
  job.phase = JobPhase::finishing;
  job.end_status = std::string(status);
  const SimTime now = engine_.now();
  const Fields tag{{"job", s.job_id}};

  for (auto& [id, undo] : job.flows) {
    transfers_.cancel(id);
    undo();
  }
  job.flows.clear();

  Fields end{{"job", s.job_id}, {"status", std::string(status)}};
  if (!reason.empty()) end.add("reason", std::string(reason));
  engine_.emit(EventKind::job_end, std::move(end));

  for (const auto& [id, chunks] : job.writing) {
    if (state_.has_replica(id)) data_->scrub(id, "partial", tag);
  }
  job.writing.clear();
  for (auto it = job.output_replicas.begin(); it != job.output_replicas.end();) {
    it = state_.has_replica(it->second) ? std::next(it) : job.output_replicas.erase(it);
  }
  for (ReplicaId id : job.scratch) {
    if (state_.has_replica(id)) data_->scrub(id, "cleanup", tag);
  }
  job.scratch.clear();

  if (job.fs >= 0) {
    DistributedFs& fs = state_.fs(job.fs);
    for (int m : fs.members) {
      for (ReplicaId id : state_.replicas_on(m)) {
        if (state_.replica(id).fs == job.fs) state_.detach_from_fs(id);
      }
    }
    fs.mounted = false;
  }

  for (ReplicaId id : job.held) {
    if (Replica* r = state_.find_replica(id)) r->holder_job = -1;
  }
  for (ReplicaId id : job.staged_created) {
    Replica* r = state_.find_replica(id);
    if (!r) continue;
    r->holder_job = -1;
    if (r->state == ReplicaState::resident && shared_in_workflow(s, r->dataset)) {
      data_->retain(id, now + retention_ttl(s));
    } else {
      data_->scrub(id, "cleanup", tag);
    }
  }

  std::vector<std::pair<std::size_t, bool>> kept;
  for (const auto& [oi, id] : job.output_replicas) {
    const Replica& r = state_.replica(id);
    if (r.tier == ReplicaTier::external_fs) continue;
    const OutputSpec& o = s.outputs[oi];
    const bool retain = !s.workflow_id.empty() && (s.retain_outputs || shared_in_workflow(s, o.id));
    if (retain) data_->retain(id, now + retention_ttl(s));
    kept.emplace_back(oi, retain);
  }

  for (int n : job.nodes) {
    NodeState& ns = state_.node(n);
    ns.reserved = 0;
    ns.job = -1;
  }

  for (const auto& [oi, retain] : kept) {
    const ReplicaId id = job.output_replicas.at(oi);
    const OutputSpec& o = s.outputs[oi];
    if (!retain && !o.stage_out) {
      data_->scrub(id, "cleanup", tag);
      continue;
    }
    if (state_.replica(id).reservation_job >= 0) state_.set_reservation(id, -1);
    if (!o.stage_out) continue;
    try {
      data_->stage_out(id, tag, [this, j](ReplicaId) {
        if (--jobs_[j].pending_stage_outs == 0) finish(j);
      });
      ++job.pending_stage_outs;
    } catch (const SimError& e) {
      if (e.code() != ErrorCode::TierFull) throw;
      if (!retain) data_->scrub(id, "cleanup", tag);
    }
  }

  for (ReplicaId id : job.held) data_->release(id);
  for (ReplicaId id : job.staged_created) data_->release(id);
  job.held.clear();

  if (job.pending_stage_outs == 0) finish(j);
  poke();
}

void Simulation::finish(std::size_t j) {
  JobRun& job = jobs_[j];
  job.phase = JobPhase::done;
  if (job.end_status.empty()) job.end_status = "completed";
  ++finished_;
  for (std::size_t succ : job.successors) {
    JobRun& next = jobs_[succ];
    if (next.phase != JobPhase::gated) continue;
    if (next.waiting_on > 0 && --next.waiting_on == 0) next.phase = JobPhase::queued;
  }
  poke();
}

// ---------------------------------------------------------------- invariants

std::vector<std::string> Simulation::check_invariants() const {
  std::vector<std::string> out = state_.audit_nodes();
  std::vector<int> owners(state_.node_count(), 0);
  for (const JobRun& job : jobs_) {
    if (job.phase != JobPhase::allocated && job.phase != JobPhase::staging && job.phase != JobPhase::running) continue;
    for (int n : job.nodes) {
      ++owners[static_cast<std::size_t>(n)];
      const NodeState& ns = state_.node(n);
      if (ns.job != static_cast<int>(job.index)) {
        out.push_back(fmt::format("job {} holds node {} but the node records job {}", job.spec.job_id, n, ns.job));
      }
      if (ns.reservation_bytes > ns.reserved) {
        out.push_back(fmt::format("job {} wrote {} bytes into a {} byte reservation on node {}", job.spec.job_id,
                                  ns.reservation_bytes, ns.reserved, n));
      }
    }
  }
  for (std::size_t n = 0; n < owners.size(); ++n) {
    if (owners[n] > 1) out.push_back(fmt::format("node {} is held by {} jobs", n, owners[n]));
    const NodeState& ns = state_.node(static_cast<int>(n));
    if (ns.job >= 0 && owners[n] == 0) out.push_back(fmt::format("node {} records job {} which is not running", n, ns.job));
    const MemoryView v = visible_memory(ns.spec, ns.mode);
    if (v.persistence_guaranteed != (ns.mode == MemoryMode::SLM)) out.push_back(fmt::format("node {} persistence flag", n));
  }
  const flow::FlowNetwork& net = transfers_.network();
  const std::vector<flow::Rate> usage = net.usages();
  for (flow::ResourceId r = 0; r < net.resource_count(); ++r) {
    if (usage[r] > net.capacity(r)) {
      out.push_back(fmt::format("resource {} carries more than its bandwidth", net.resource_name(r)));
    }
  }
  return out;
}

void Simulation::record_occupancy() {
  const bool first = occupancy_.empty();
  for (std::size_t n = 0; n < state_.node_count(); ++n) {
    const NodeState& ns = state_.node(static_cast<int>(n));
    const Bytes used = ns.reserved + ns.replica_bytes;
    if (first || used != last_used_[n]) {
      last_used_[n] = used;
      occupancy_.push_back(OccupancySample{engine_.now(), static_cast<int>(n), used});
    }
  }
}

void Simulation::observe() {
  if (options_.check_invariants) {
    const auto problems = check_invariants();
    if (!problems.empty()) {
      throw SimError(ErrorCode::InvariantViolation,
                     fmt::format("at {} ns: {}", to_ns(engine_.now()), fmt::join(problems, "; ")));
    }
  }
  record_occupancy();
  if (waiting_ && engine_.trace().size() != trace_seen_) poke();
  trace_seen_ = engine_.trace().size();
}

}  // namespace nvsim
