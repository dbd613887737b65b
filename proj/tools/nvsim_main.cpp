#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "nvsim/cluster.hpp"
#include "nvsim/config.hpp"
#include "nvsim/error.hpp"
#include "nvsim/metrics.hpp"
#include "nvsim/scenario.hpp"
#include "nvsim/scheduler.hpp"
#include "nvsim/simulation.hpp"
#include "nvsim/units.hpp"
#include "nvsim/workload.hpp"

namespace fs = std::filesystem;
using namespace nvsim;

namespace {

enum Exit { kOk = 0, kConfig = 1, kWorkload = 2, kRuntime = 3 };

std::mutex out_mutex;

struct Stage {
  int exit_code;
};

void init_logging() {
  auto logger = spdlog::stderr_color_mt("nvsim");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("NVSIM_LOG")) {
    const auto level = spdlog::level::from_str(env);
    if (level != spdlog::level::off || std::string_view(env) == "off") spdlog::set_level(level);
  }
}

std::pair<std::uint64_t, std::uint64_t> parse_seed_range(const std::string& text) {
  const auto dots = text.find("..");
  try {
    if (dots == std::string::npos) {
      const auto v = std::stoull(text);
      return {v, v};
    }
    const auto a = std::stoull(text.substr(0, dots));
    const auto b = std::stoull(text.substr(dots + 2));
    if (b < a) throw std::invalid_argument("empty range");
    return {a, b};
  } catch (const std::exception&) {
    throw CLI::ValidationError("--seeds", "expected a..b, got '" + text + "'");
  }
}

/// Runs fn(seed) for every seed on up to hardware_concurrency threads;
/// returns the highest exit code.
template <class Fn>
int for_each_seed(std::uint64_t first, std::uint64_t last, Fn fn) {
  const std::uint64_t count = last - first + 1;
  const auto workers = static_cast<std::uint64_t>(std::max(1u, std::thread::hardware_concurrency()));
  std::atomic<std::uint64_t> next{first};
  std::atomic<int> worst{kOk};
  std::vector<std::thread> pool;
  for (std::uint64_t w = 0; w < std::min(workers, count); ++w) {
    pool.emplace_back([&] {
      for (std::uint64_t s = next++; s <= last; s = next++) {
        int rc = kRuntime;
        try {
          rc = fn(s);
        } catch (const std::exception& e) {
          std::lock_guard lock(out_mutex);
          std::cerr << "nvsim: seed " << s << ": " << e.what() << '\n';
        }
        int cur = worst.load();
        while (rc > cur && !worst.compare_exchange_weak(cur, rc)) {}
      }
    });
  }
  for (auto& t : pool) t.join();
  return worst.load();
}

template <class... Args>
void say(fmt::format_string<Args...> f, Args&&... args) {
  std::lock_guard lock(out_mutex);
  std::cout << fmt::format(f, std::forward<Args>(args)...) << '\n';
}

void report(const SimError& e) {
  std::lock_guard lock(out_mutex);
  std::cerr << "nvsim: " << e.what() << '\n';
}

ClusterSpec load_valid_cluster(const std::string& path) {
  try {
    ClusterSpec c = load_cluster(path);
    const ValidationReport r = validate_cluster(c);
    for (const Diagnostic& w : r.warnings) spdlog::warn("{}", w.message);
    r.throw_if_failed();
    return c;
  } catch (const SimError& e) {
    report(e);
    throw Stage{kConfig};
  }
}

// ---- simulate ---------------------------------------------------------------

struct SimulateArgs {
  std::string cluster;
  std::string workload;
  std::string out = "nvsim-out";
  std::string policy = "fcfs-backfill";
  std::string scorer = "none";
  ScorerWeights weights;
  std::size_t max_backfill_depth = 256;
  bool plot_data = false;
  bool no_invariants = false;
  std::optional<std::string> seeds;
  std::uint64_t seed = 1;
  std::uint32_t synth_jobs = 50;
};

Policy policy_from(const SimulateArgs& a) {
  Policy p;
  p.queueing = *parse_queueing(a.policy);
  p.scorer = *parse_scorer(a.scorer);
  p.weights = a.weights;
  p.max_backfill_depth = a.max_backfill_depth;
  try {
    validate_policy(p);
  } catch (const SimError& e) {
    report(e);
    throw Stage{kConfig};
  }
  return p;
}

int simulate_one(const ClusterSpec& cluster, const WorkloadSpec& workload, const SimulateArgs& a, const fs::path& out) {
  SimOptions opts;
  opts.policy = policy_from(a);
  opts.check_invariants = !a.no_invariants;
  std::unique_ptr<Simulation> sim;
  try {
    sim = std::make_unique<Simulation>(cluster, workload, opts);
  } catch (const SimError& e) {
    report(e);
    return kWorkload;
  }
  try {
    sim->run();
  } catch (const SimError& e) {
    report(e);
    return kRuntime;
  }
  try {
    write_run_outputs(out, *sim, a.plot_data);
  } catch (const SimError& e) {
    report(e);
    return kRuntime;
  }
  std::size_t done = 0;
  SimTime makespan{};
  for (const JobMetrics& m : job_metrics(sim->trace())) {
    done += m.status == "completed";
    if (m.done) makespan = std::max(makespan, *m.done);
  }
  say("{}: {} jobs, {} completed, makespan {} s", out.string(), sim->jobs().size(), done, format_seconds(makespan));
  return kOk;
}

int run_simulate(const SimulateArgs& a) {
  const ClusterSpec cluster = load_valid_cluster(a.cluster);
  policy_from(a);
  if (!a.workload.empty() && !a.seeds) {
    WorkloadSpec w;
    try {
      w = load_workload(a.workload);
    } catch (const SimError& e) {
      report(e);
      return kWorkload;
    }
    return simulate_one(cluster, w, a, a.out);
  }
  const auto [first, last] = a.seeds ? parse_seed_range(*a.seeds) : std::pair{a.seed, a.seed};
  return for_each_seed(first, last, [&](std::uint64_t s) {
    SynthParams p;
    p.seed = s;
    p.jobs = a.synth_jobs;
    WorkloadSpec w;
    try {
      w = a.workload.empty() ? synth_workload(p, cluster) : load_workload(a.workload);
    } catch (const SimError& e) {
      report(e);
      return int{kWorkload};
    }
    const fs::path dir = a.seeds ? fs::path(a.out) / fmt::format("seed-{}", s) : fs::path(a.out);
    return simulate_one(cluster, w, a, dir);
  });
}

// ---- table1 -----------------------------------------------------------------

struct Table1Args {
  std::vector<std::uint64_t> nodes{1, 768, 3072, 24576, 196608};
  std::string bapm = "3TB";
  std::string flops = "2TFlop/s";
  std::string bapm_bw = "20GB/s";
  std::optional<std::string> cluster;
  std::optional<std::string> crossover;
  bool csv = false;
};

int run_table1(const Table1Args& a) {
  Bytes bapm = 0;
  FlopsPerSecond flops = 0;
  BytesPerSecond bw = 0;
  try {
    if (a.cluster) {
      const ClusterSpec c = load_valid_cluster(*a.cluster);
      const AggregateReport per_node = aggregate_metrics(ClusterSpec{{c.nodes.front()}, 1, 1});
      bapm = static_cast<Bytes>(per_node.total_bapm_bytes);
      flops = static_cast<FlopsPerSecond>(per_node.total_flops);
      bw = static_cast<BytesPerSecond>(per_node.total_bapm_bw);
    } else {
      bapm = parse_bytes(a.bapm);
      flops = parse_flops(a.flops);
      bw = parse_bandwidth(a.bapm_bw);
    }
    if (bapm == 0 || flops == 0 || bw == 0) {
      throw SimError(ErrorCode::NonPositiveParameter, "per-node parameters must be positive");
    }
    for (std::uint64_t n : a.nodes) {
      if (n == 0) throw SimError(ErrorCode::NonPositiveParameter, "node counts must be positive");
    }
  } catch (const SimError& e) {
    report(e);
    return kConfig;
  }

  if (a.csv) {
    say("nodes,compute_pflops,bapm_capacity_pb,bapm_io_bw_tbs");
  } else {
    say("{:>8}  {:>14}  {:>16}  {:>14}", "nodes", "compute_PFlop/s", "bapm_capacity_PB", "bapm_io_TB/s");
  }
  for (std::uint64_t n : a.nodes) {
    const AggregateReport r = aggregate_for(n, bapm, flops, bw);
    if (a.csv) {
      say("{},{},{},{}", n, r.compute_pflops_display(), r.bapm_capacity_pb_display(), r.bapm_io_bw_tbs_display());
    } else {
      say("{:>8}  {:>14}  {:>16}  {:>14}", n, r.compute_pflops_display(), r.bapm_capacity_pb_display(),
          r.bapm_io_bw_tbs_display());
    }
  }
  if (a.crossover) {
    try {
      const BytesPerSecond target = parse_bandwidth(*a.crossover);
      if (target == 0) throw SimError(ErrorCode::NonPositiveParameter, "crossover target must be positive");
      say("crossover {} nodes for {}", crossover_nodes(target, bw), format_bandwidth(target));
    } catch (const SimError& e) {
      report(e);
      return kConfig;
    }
  }
  return kOk;
}

// ---- scenario burst-buffer --------------------------------------------------

struct ScenarioArgs {
  std::uint64_t seed = 0;
  std::optional<std::string> seeds;
  bool no_stage_in = false;
  bool force_early_launch = false;
  std::optional<std::string> out;
};

int run_scenario(const ScenarioArgs& a) {
  const auto [first, last] = a.seeds ? parse_seed_range(*a.seeds) : std::pair{a.seed, a.seed};
  const bool single = first == last;
  return for_each_seed(first, last, [&](std::uint64_t s) {
    BurstBufferOptions o;
    o.seed = s;
    o.stage_in = !a.no_stage_in;
    o.force_early_launch = a.force_early_launch;
    SimOptions so;
    so.launch_before_stage_in = o.force_early_launch;
    Simulation sim(burst_buffer_cluster(s), burst_buffer_workload(s, o.stage_in), so);
    int rc = kOk;
    std::string verdict;
    std::vector<StepMark> steps;
    try {
      sim.run();
      steps = verify_burst_buffer(sim.trace(), o.stage_in);
      verdict = "PASS";
    } catch (const SimError& e) {
      verdict = fmt::format("FAIL {}", e.what());
      rc = kRuntime;
    }
    if (a.out) {
      const fs::path dir = single ? fs::path(*a.out) : fs::path(*a.out) / fmt::format("seed-{}", s);
      try {
        write_run_outputs(dir, sim, false);
      } catch (const SimError& e) {
        report(e);
        rc = kRuntime;
      }
    }
    std::lock_guard lock(out_mutex);
    if (single) {
      for (const StepMark& m : steps) {
        std::cout << fmt::format("step {} {:<10} t={} seq={}\n", m.step, m.name, format_seconds(m.time), m.seq);
      }
    }
    std::cout << fmt::format("seed {}: {}\n", s, verdict);
    return rc;
  });
}

// ---- synth ------------------------------------------------------------------

struct SynthArgs {
  std::string cluster;
  std::string out;
  SynthParams params;
  std::int64_t min_compute_s = 60;
  std::int64_t max_compute_s = 3600;
  std::int64_t interarrival_s = 60;
  bool report_fractions = false;
};

int run_synth(SynthArgs a) {
  const ClusterSpec cluster = load_valid_cluster(a.cluster);
  a.params.min_compute = std::chrono::seconds{a.min_compute_s};
  a.params.max_compute = std::chrono::seconds{a.max_compute_s};
  a.params.mean_interarrival = std::chrono::seconds{a.interarrival_s};
  WorkloadSpec w;
  try {
    w = synth_workload(a.params, cluster);
  } catch (const SimError& e) {
    report(e);
    return kWorkload;
  }
  const std::string json = workload_to_json(w);
  if (a.out.empty() || a.out == "-") {
    std::cout << json << '\n';
  } else {
    std::ofstream f(a.out, std::ios::binary);
    if (!f) {
      std::cerr << "nvsim: cannot write " << a.out << '\n';
      return kWorkload;
    }
    f << json << '\n';
  }
  if (a.report_fractions) {
    double sum = 0;
    double lo = 1;
    double hi = 0;
    for (const JobSpec& j : w.jobs) {
      const double f = declared_io_fraction(w, j, cluster, a.params);
      sum += f;
      lo = std::min(lo, f);
      hi = std::max(hi, f);
    }
    const double mean = w.jobs.empty() ? 0.0 : sum / static_cast<double>(w.jobs.size());
    std::cerr << fmt::format("io fraction: min {:.4f} mean {:.4f} max {:.4f} over {} jobs\n", lo, mean, hi, w.jobs.size());
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  init_logging();
  CLI::App app{"nvsim: discrete-event simulator of clusters with byte-addressable persistent memory"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Run a workload on a cluster and write metrics and trace");
  simulate->add_option("-c,--cluster", sim.cluster, "Cluster description (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("-w,--workload", sim.workload, "Workload description (JSON); synthesized from --seed if omitted");
  simulate->add_option("-o,--out", sim.out, "Output directory")->capture_default_str();
  simulate->add_option("--policy", sim.policy, "Queueing policy")
      ->check(CLI::IsMember({"fcfs", "fcfs-backfill", "backfill"}))
      ->capture_default_str();
  simulate->add_option("--scorer", sim.scorer, "Node scorer")
      ->check(CLI::IsMember({"none", "data-aware", "energy-aware"}))
      ->capture_default_str();
  simulate->add_option("--w-data", sim.weights.w_data, "Data-aware weight per resident byte")->capture_default_str();
  simulate->add_option("--e-byte", sim.weights.e_byte, "Energy per moved byte (J)")->capture_default_str();
  simulate->add_option("--e-switch", sim.weights.e_switch, "Energy per mode switch (J)")->capture_default_str();
  simulate->add_option("--max-backfill-depth", sim.max_backfill_depth, "Queue entries the backfill planner looks at")
      ->capture_default_str();
  simulate->add_option("--seed", sim.seed, "Seed for the synthesized workload")->capture_default_str();
  simulate->add_option("--seeds", sim.seeds, "Seed range a..b, one run per seed in <out>/seed-<n>, run concurrently");
  simulate->add_option("--synth-jobs", sim.synth_jobs, "Jobs per synthesized workload")->capture_default_str();
  simulate->add_flag("--plot-data", sim.plot_data, "Also write plot_data.csv (long format)");
  simulate->add_flag("--no-invariants", sim.no_invariants, "Skip the per-event invariant checker");

  Table1Args t1;
  auto* table1 = app.add_subcommand("table1", "Project aggregate compute, B-APM capacity and bandwidth by node count");
  table1->add_option("-n,--nodes", t1.nodes, "Node counts")->capture_default_str();
  table1->add_option("--bapm", t1.bapm, "B-APM capacity per node")->capture_default_str();
  table1->add_option("--flops", t1.flops, "Compute rate per node")->capture_default_str();
  table1->add_option("--bapm-bw", t1.bapm_bw, "B-APM bandwidth per node")->capture_default_str();
  table1->add_option("-c,--cluster", t1.cluster, "Take per-node figures from a cluster file instead")
      ->check(CLI::ExistingFile);
  table1->add_option("--crossover", t1.crossover, "Also print the node count whose B-APM bandwidth reaches this target");
  table1->add_flag("--csv", t1.csv, "Comma-separated output");

  ScenarioArgs sc;
  auto* scenario = app.add_subcommand("scenario", "Built-in scenarios");
  scenario->require_subcommand(1);
  auto* bb = scenario->add_subcommand("burst-buffer", "Stage-in, compute, checkpoint and stage-out on a distributed B-APM file system");
  bb->add_option("--seed", sc.seed, "Scenario seed")->capture_default_str();
  bb->add_option("--seeds", sc.seeds, "Seed range a..b, run concurrently");
  bb->add_flag("--no-stage-in", sc.no_stage_in, "Skip staging; the job reads from the external file system");
  bb->add_flag("--force-early-launch", sc.force_early_launch, "Launch before the stage-in finishes (must fail)");
  bb->add_option("-o,--out", sc.out, "Write metrics and trace here");

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "Generate a random workload for a cluster");
  synth->add_option("-c,--cluster", sy.cluster, "Cluster description (JSON)")->required()->check(CLI::ExistingFile);
  synth->add_option("-o,--out", sy.out, "Output file (stdout if omitted)");
  synth->add_option("--seed", sy.params.seed, "Seed")->capture_default_str();
  synth->add_option("--jobs", sy.params.jobs, "Job count")->capture_default_str();
  synth->add_option("--min-nodes", sy.params.min_nodes, "Smallest job")->capture_default_str();
  synth->add_option("--max-nodes", sy.params.max_nodes, "Largest job")->capture_default_str();
  synth->add_option("--min-compute", sy.min_compute_s, "Shortest compute time (s)")->capture_default_str();
  synth->add_option("--max-compute", sy.max_compute_s, "Longest compute time (s)")->capture_default_str();
  synth->add_option("--io-lo", sy.params.io_fraction_lo, "Lowest I/O fraction")->capture_default_str();
  synth->add_option("--io-hi", sy.params.io_fraction_hi, "Highest I/O fraction")->capture_default_str();
  synth->add_option("--interarrival", sy.interarrival_s, "Mean interarrival time (s)")->capture_default_str();
  synth->add_option("--workflow-p", sy.params.workflow_probability, "Probability a job joins a workflow")
      ->capture_default_str();
  synth->add_option("--dlm-p", sy.params.dlm_probability, "Probability a job wants DLM")->capture_default_str();
  synth->add_option("--stage-p", sy.params.stage_probability, "Probability a job stages its inputs")
      ->capture_default_str();
  synth->add_flag("--report", sy.report_fractions, "Print I/O fraction statistics to stderr");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) return run_simulate(sim);
    if (*table1) return run_table1(t1);
    if (*bb) return run_scenario(sc);
    if (*synth) return run_synth(sy);
  } catch (const Stage& s) {
    return s.exit_code;
  } catch (const CLI::Error& e) {
    return app.exit(e);
  }
  return kOk;
}
