#include "nvsim/scenario.hpp"

#include <algorithm>
#include <optional>
#include <random>

#include <fmt/format.h>

#include "nvsim/error.hpp"

namespace nvsim {
namespace {

constexpr Bytes kGB = 1'000'000'000;

std::uint64_t uniform(std::mt19937_64& rng, std::uint64_t lo, std::uint64_t hi) {
  return lo + rng() % (hi - lo + 1);
}

[[noreturn]] void violation(const std::string& what) { throw SimError(ErrorCode::OrderingViolation, what); }

}  // namespace

ClusterSpec burst_buffer_cluster(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ClusterSpec c;
  for (int n = 0; n < 4; ++n) {
    NodeSpec s;
    s.node_id = n;
    s.sockets = 2;
    s.channels_per_socket = 6;
    s.slots_per_channel = 2;
    s.dram_dimm_bytes = 64 * (Bytes{1} << 30);
    s.bapm_dimm_bytes = 256 * (Bytes{1} << 30);
    s.dram_dimms_per_socket = 6;
    s.bapm_dimms_per_socket = 6;
    s.dram_bw = 100 * kGB;
    s.bapm_bw = 20 * kGB;
    s.flops = 2'000'000'000'000;
    s.link_bw = 12'500'000'000;
    s.dram_latency = SimDuration{100};
    s.bapm_latency_ratio = 5.0;
    s.initial_mode = rng() % 2 == 0 ? MemoryMode::SLM : MemoryMode::DLM;
    c.nodes.push_back(s);
  }
  c.external_fs_bw = 100 * kGB;
  c.external_fs_capacity = 1'000'000 * kGB;
  c.mode_switch_seconds = std::chrono::seconds{300};
  return c;
}

WorkloadSpec burst_buffer_workload(std::uint64_t seed, bool stage_in) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const Bytes input = uniform(rng, 200, 400) * kGB;
  const Bytes output = uniform(rng, 50, 150) * kGB;
  const Bytes checkpoint = uniform(rng, 50, 200) * kGB;
  const SimDuration compute = std::chrono::seconds{static_cast<std::int64_t>(uniform(rng, 600, 1800))};

  WorkloadSpec w;
  w.datasets.push_back(DataSetSpec{"bb-input", input, "alice", std::nullopt, ""});

  JobSpec j;
  j.job_id = kBurstBufferJob;
  j.owner = "alice";
  j.nodes_requested = 2;
  j.bapm_bytes_per_node = 1000 * kGB;
  j.compute_seconds = compute;
  j.walltime_limit = compute + std::chrono::hours{4};
  j.required_mode = MemoryMode::SLM;
  j.stage_inputs = stage_in ? StageMode::distributed_fs : StageMode::none;
  j.inputs = {"bb-input"};
  j.io_phases.push_back(IoPhase{compute / 2, checkpoint, Direction::write, Tier::distributed_fs, true});
  j.outputs.push_back(OutputSpec{"bb-output", output, Tier::distributed_fs, true});
  w.jobs.push_back(std::move(j));
  return w;
}

std::vector<StepMark> verify_burst_buffer(const Trace& trace, bool stage_in, const std::string& job) {
  std::optional<Event> submit, allocate, mount, staged, start, read, write, end, out;
  std::size_t reads = 0;
  std::size_t external_reads = 0;
  for (const Event& e : trace.events()) {
    if (e.fields.get("job") != std::optional<std::string_view>(job)) continue;
    switch (e.kind) {
      case EventKind::submit:
        if (!submit) submit = e;
        break;
      case EventKind::allocate:
        if (!allocate) allocate = e;
        break;
      case EventKind::fs_mount:
        if (!mount) mount = e;
        break;
      case EventKind::stage_end:
        if (e.fields.at("direction") != "out") staged = e;
        break;
      case EventKind::stage_start:
        if (e.fields.at("direction") == "out" && !out) out = e;
        break;
      case EventKind::job_start:
        if (!start) start = e;
        break;
      case EventKind::io_start:
        if (e.fields.at("dir") == "read") {
          if (!read) read = e;
          ++reads;
          if (e.fields.at("path") == "external") ++external_reads;
        } else if (!write) {
          write = e;
        }
        break;
      case EventKind::job_end:
        if (!end) end = e;
        break;
      default: break;
    }
  }

  if (allocate && allocate->fields.at("mode") != "SLM") {
    violation(fmt::format("step 2 (allocate): job runs in {}, expected SLM", allocate->fields.at("mode")));
  }
  if (allocate && !mount) violation("step 2 (allocate): no distributed file system mounted");
  if (allocate && mount && mount->seq < allocate->seq) violation("step 2 (allocate): file system mounted before allocation");
  if (start) {
    const std::string_view modes = start->fields.at("modes");
    for (std::size_t pos = 0; pos < modes.size();) {
      const std::size_t comma = std::min(modes.find(',', pos), modes.size());
      if (modes.substr(pos, comma - pos) != "SLM") violation("step 4 (launch): a node is not in SLM");
      pos = comma + 1;
    }
  }

  struct Slot {
    int step;
    const char* name;
    const std::optional<Event>* event;
  };
  std::vector<Slot> slots{{1, "submit", &submit}, {2, "allocate", &allocate}};
  if (stage_in) slots.push_back({3, "stage-in", &staged});
  slots.insert(slots.end(), {{4, "launch", &start},
                             {5, "reads", &read},
                             {6, "writes", &write},
                             {7, "finish", &end},
                             {8, "stage-out", &out}});

  std::vector<StepMark> marks;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const Slot& s = slots[i];
    if (!*s.event) violation(fmt::format("step {} ({}) missing", s.step, s.name));
    if (i > 0) {
      const Slot& p = slots[i - 1];
      if ((*s.event)->seq < (*p.event)->seq) {
        violation(fmt::format("step {} ({}) at seq {} precedes step {} ({}) at seq {}", s.step, s.name,
                              (*s.event)->seq, p.step, p.name, (*p.event)->seq));
      }
    }
    marks.push_back(StepMark{s.step, s.name, (*s.event)->time, (*s.event)->seq});
  }
  if (!stage_in && external_reads != reads) {
    violation(fmt::format("step 5 (reads): {} of {} reads bypass the external file system", reads - external_reads, reads));
  }
  if (stage_in && external_reads > 0) {
    violation(fmt::format("step 5 (reads): {} reads went to the external file system despite stage-in", external_reads));
  }
  return marks;
}

BurstBufferRun run_burst_buffer(const BurstBufferOptions& options) {
  SimOptions so;
  so.policy = options.policy;
  so.launch_before_stage_in = options.force_early_launch;
  BurstBufferRun run;
  run.sim = std::make_unique<Simulation>(burst_buffer_cluster(options.seed),
                                         burst_buffer_workload(options.seed, options.stage_in), so);
  run.sim->run();
  run.steps = verify_burst_buffer(run.sim->trace(), options.stage_in);
  return run;
}

}  // namespace nvsim
