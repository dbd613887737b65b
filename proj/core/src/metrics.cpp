#include "nvsim/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>

#include <fmt/format.h>

#include "nvsim/error.hpp"

namespace nvsim {
namespace {

Bytes to_bytes(std::string_view s) { return std::stoull(std::string(s)); }

std::string secs(const std::optional<SimTime>& t) { return t ? format_seconds(*t) : std::string{}; }

struct Block {
  SimTime first_start = SimTime::max();
  std::optional<SimTime> last_end;
  std::int64_t ideal_ns = 0;
};

struct Accum {
  JobMetrics m;
  std::optional<SimTime> ready;
  std::optional<SimTime> last_stage_out;
  std::map<std::string, Block> blocks;
};

}  // namespace

std::vector<JobMetrics> job_metrics(const Trace& trace) {
  std::vector<std::string> order;
  std::map<std::string, Accum, std::less<>> jobs;
  auto job_of = [&](const Event& e) -> Accum* {
    auto id = e.fields.get("job");
    if (!id) return nullptr;
    auto it = jobs.find(*id);
    return it == jobs.end() ? nullptr : &it->second;
  };

  for (const Event& e : trace.events()) {
    if (e.kind == EventKind::submit) {
      const std::string id(e.fields.at("job"));
      Accum a;
      a.m.job_id = id;
      a.m.owner = std::string(e.fields.at("owner"));
      const auto wf = e.fields.get("workflow");
      a.m.workflow_id = wf && *wf != "-" ? std::string(*wf) : std::string{};
      a.m.nodes = static_cast<std::uint32_t>(std::stoul(std::string(e.fields.at("nodes"))));
      a.m.submit = e.time;
      a.m.status = "incomplete";
      order.push_back(id);
      jobs.emplace(id, std::move(a));
      continue;
    }
    Accum* a = job_of(e);
    if (!a) continue;
    JobMetrics& m = a->m;
    switch (e.kind) {
      case EventKind::reject:
        m.status = "rejected";
        m.done = e.time;
        break;
      case EventKind::allocate:
        m.alloc = e.time;
        m.node_list = std::string(e.fields.at("nodes"));
        break;
      case EventKind::mode_switch_end:
        a->ready = a->ready ? std::max(*a->ready, e.time) : e.time;
        break;
      case EventKind::job_start:
        m.start = e.time;
        if (auto l = e.fields.get("latency_ns")) m.dlm_latency_ns = std::string(*l);
        break;
      case EventKind::job_end:
        m.job_end = e.time;
        m.status = std::string(e.fields.at("status"));
        break;
      case EventKind::stage_end: {
        const auto dir = e.fields.at("direction");
        const Bytes b = to_bytes(e.fields.at("bytes"));
        if (dir == "out") {
          m.bytes_staged_out += b;
          a->last_stage_out = e.time;
        } else {
          m.bytes_staged_in += b;
        }
        break;
      }
      case EventKind::io_start: {
        Block& b = a->blocks[std::string(e.fields.at("block"))];
        b.first_start = std::min(b.first_start, e.time);
        b.ideal_ns = std::stoll(std::string(e.fields.at("ideal_ns")));
        break;
      }
      case EventKind::io_end: {
        Block& b = a->blocks[std::string(e.fields.at("block"))];
        b.last_end = e.time;
        const Bytes bytes = to_bytes(e.fields.at("bytes"));
        const auto tier = e.fields.at("tier");
        const auto path = e.fields.at("path");
        if (tier == "distributed-fs") {
          m.bytes_distributed += bytes;
        } else if (path == "local") {
          m.bytes_local += bytes;
        } else if (path == "remote-bapm") {
          m.bytes_remote_bapm += bytes;
        } else {
          m.bytes_external += bytes;
        }
        break;
      }
      default: break;
    }
  }

  std::vector<JobMetrics> out;
  out.reserve(order.size());
  for (const std::string& id : order) {
    Accum& a = jobs.at(id);
    JobMetrics& m = a.m;
    if (m.job_end) {
      m.done = a.last_stage_out ? std::max(*m.job_end, *a.last_stage_out) : *m.job_end;
    }
    if (m.alloc) {
      m.wait = *m.alloc - m.submit;
      const SimTime ready = a.ready.value_or(*m.alloc);
      m.mode_switch = ready - *m.alloc;
      if (m.job_end) {
        const SimTime launch = m.start.value_or(*m.job_end);
        m.stage_in = launch - ready;
        m.run = *m.job_end - launch;
        m.stage_out = *m.done - *m.job_end;
      }
    }
    for (const auto& [name, b] : a.blocks) {
      const SimTime end = b.last_end.value_or(m.job_end.value_or(b.first_start));
      m.io += std::max(SimDuration{0}, end - b.first_start);
      m.io_ideal += SimDuration{b.ideal_ns};
    }
    m.staging_slowdown = std::max(SimDuration{0}, m.io - m.io_ideal);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<NodeMetrics> node_metrics(const Trace& trace, const std::vector<OccupancySample>& occupancy,
                                      std::size_t node_count) {
  std::vector<NodeMetrics> out(node_count);
  for (std::size_t n = 0; n < node_count; ++n) out[n].node = static_cast<int>(n);
  std::map<std::string, std::pair<SimTime, std::vector<int>>> held;
  auto parse_nodes = [](std::string_view list) {
    std::vector<int> v;
    std::size_t pos = 0;
    while (pos <= list.size()) {
      const std::size_t comma = list.find(',', pos);
      const std::size_t end = comma == std::string_view::npos ? list.size() : comma;
      if (end > pos) v.push_back(std::stoi(std::string(list.substr(pos, end - pos))));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    return v;
  };
  for (const Event& e : trace.events()) {
    switch (e.kind) {
      case EventKind::mode_switch_end:
        if (!e.fields.has("noop")) ++out.at(std::stoul(std::string(e.fields.at("node")))).mode_switches;
        break;
      case EventKind::scrub: {
        const auto at = e.fields.at("at");
        if (at.starts_with("node:")) out.at(std::stoul(std::string(at.substr(5)))).bytes_scrubbed += to_bytes(e.fields.at("bytes"));
        break;
      }
      case EventKind::allocate: {
        auto nodes = parse_nodes(e.fields.at("nodes"));
        for (int n : nodes) ++out.at(static_cast<std::size_t>(n)).jobs;
        held[std::string(e.fields.at("job"))] = {e.time, std::move(nodes)};
        break;
      }
      case EventKind::job_end: {
        auto it = held.find(std::string(e.fields.at("job")));
        if (it == held.end()) break;
        for (int n : it->second.second) out.at(static_cast<std::size_t>(n)).busy += e.time - it->second.first;
        held.erase(it);
        break;
      }
      default: break;
    }
  }
  for (const OccupancySample& s : occupancy) {
    auto& peak = out.at(static_cast<std::size_t>(s.node)).peak_occupancy;
    peak = std::max(peak, s.used);
  }
  return out;
}

Summary summarize(const Trace& trace, const std::vector<JobMetrics>& jobs, const ScorerWeights& weights) {
  std::map<std::string, std::size_t> status;
  SimTime makespan{};
  Bytes io = 0;
  Bytes moved = 0;
  Bytes staged_in = 0;
  Bytes staged_out = 0;
  SimDuration wait{};
  SimDuration slowdown{};
  for (const JobMetrics& m : jobs) {
    ++status[m.status];
    if (m.done) makespan = std::max(makespan, *m.done);
    io += m.bytes_local + m.bytes_distributed + m.bytes_remote_bapm + m.bytes_external;
    moved += m.bytes_remote_bapm + m.bytes_external + m.bytes_staged_in + m.bytes_staged_out;
    staged_in += m.bytes_staged_in;
    staged_out += m.bytes_staged_out;
    wait += m.wait;
    slowdown += m.staging_slowdown;
  }
  std::uint64_t switches = 0;
  Bytes scrubbed = 0;
  for (const Event& e : trace.events()) {
    if (e.kind == EventKind::mode_switch_end && !e.fields.has("noop")) ++switches;
    if (e.kind == EventKind::scrub) scrubbed += to_bytes(e.fields.at("bytes"));
  }
  const std::int64_t span = to_ns(makespan);
  const unsigned __int128 bw = span > 0 ? static_cast<unsigned __int128>(io) * 1'000'000'000u / static_cast<std::uint64_t>(span) : 0;
  const double energy = static_cast<double>(moved) * weights.e_byte + static_cast<double>(switches) * weights.e_switch;
  const auto mean = [&](SimDuration d) {
    return jobs.empty() ? format_seconds(SimDuration{0}) : format_seconds(SimDuration{to_ns(d) / static_cast<std::int64_t>(jobs.size())});
  };
  const auto count = [&](const char* s) { return std::to_string(status.count(s) ? status.at(s) : 0); };

  return Summary{
      {"metrics_schema", std::to_string(kMetricsSchema)},
      {"jobs", std::to_string(jobs.size())},
      {"completed", count("completed")},
      {"killed", count("killed")},
      {"failed", count("failed")},
      {"rejected", count("rejected")},
      {"makespan_s", format_seconds(makespan)},
      {"io_bytes", std::to_string(io)},
      {"aggregate_io_bandwidth_Bps", fmt::format("{}", static_cast<std::uint64_t>(bw))},
      {"bytes_staged_in", std::to_string(staged_in)},
      {"bytes_staged_out", std::to_string(staged_out)},
      {"bytes_moved", std::to_string(moved)},
      {"bytes_scrubbed", std::to_string(scrubbed)},
      {"mode_switches", std::to_string(switches)},
      {"energy_proxy_j", fmt::format("{:.6f}", energy)},
      {"mean_wait_s", mean(wait)},
      {"mean_staging_slowdown_s", mean(slowdown)},
  };
}

void write_jobs_csv(std::ostream& out, const std::vector<JobMetrics>& rows) {
  out << "job_id,workflow_id,owner,status,nodes,node_list,submit_s,alloc_s,start_s,job_end_s,done_s,"
         "wait_s,mode_switch_s,stage_in_s,run_s,stage_out_s,io_s,io_ideal_s,staging_slowdown_s,"
         "bytes_local,bytes_distributed,bytes_remote_bapm,bytes_external,bytes_staged_in,bytes_staged_out,"
         "dlm_latency_ns\n";
  for (const JobMetrics& m : rows) {
    out << fmt::format("{},{},{},{},{},\"{}\",{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", m.job_id,
                       m.workflow_id, m.owner, m.status, m.nodes, m.node_list, format_seconds(m.submit), secs(m.alloc),
                       secs(m.start), secs(m.job_end), secs(m.done), format_seconds(m.wait),
                       format_seconds(m.mode_switch), format_seconds(m.stage_in), format_seconds(m.run),
                       format_seconds(m.stage_out), format_seconds(m.io), format_seconds(m.io_ideal),
                       format_seconds(m.staging_slowdown), m.bytes_local, m.bytes_distributed, m.bytes_remote_bapm,
                       m.bytes_external, m.bytes_staged_in, m.bytes_staged_out, m.dlm_latency_ns);
  }
}

void write_nodes_csv(std::ostream& out, const std::vector<NodeMetrics>& rows) {
  out << "node_id,mode_switches,bytes_scrubbed,jobs,busy_s,peak_occupancy_bytes\n";
  for (const NodeMetrics& n : rows) {
    out << fmt::format("{},{},{},{},{},{}\n", n.node, n.mode_switches, n.bytes_scrubbed, n.jobs, format_seconds(n.busy),
                       n.peak_occupancy);
  }
}

void write_summary_csv(std::ostream& out, const Summary& summary) {
  out << "key,value\n";
  for (const auto& [k, v] : summary) out << k << ',' << v << '\n';
}

void write_plot_data(std::ostream& out, const std::vector<JobMetrics>& jobs,
                     const std::vector<OccupancySample>& occupancy) {
  out << "metric,entity,time_s,value\n";
  for (const OccupancySample& s : occupancy) {
    out << fmt::format("occupancy_bytes,node:{},{},{}\n", s.node, format_seconds(s.time), s.used);
  }
  for (const JobMetrics& m : jobs) {
    if (!m.done) continue;
    const std::string t = format_seconds(*m.done);
    out << fmt::format("wait_s,job:{},{},{}\n", m.job_id, t, format_seconds(m.wait));
    out << fmt::format("stage_in_s,job:{},{},{}\n", m.job_id, t, format_seconds(m.stage_in));
    out << fmt::format("run_s,job:{},{},{}\n", m.job_id, t, format_seconds(m.run));
    out << fmt::format("stage_out_s,job:{},{},{}\n", m.job_id, t, format_seconds(m.stage_out));
    out << fmt::format("io_s,job:{},{},{}\n", m.job_id, t, format_seconds(m.io));
    out << fmt::format("staging_slowdown_s,job:{},{},{}\n", m.job_id, t, format_seconds(m.staging_slowdown));
  }
}

void write_run_outputs(const std::filesystem::path& dir, const Simulation& sim, bool plot_data) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw SimError(ErrorCode::InvalidArgument, fmt::format("cannot create {}: {}", dir.string(), ec.message()));
  const auto open = [&](const char* name) {
    std::ofstream f(dir / name, std::ios::binary);
    if (!f) throw SimError(ErrorCode::InvalidArgument, fmt::format("cannot write {}", (dir / name).string()));
    return f;
  };
  const auto jobs = job_metrics(sim.trace());
  {
    auto f = open("jobs.csv");
    write_jobs_csv(f, jobs);
  }
  {
    auto f = open("nodes.csv");
    write_nodes_csv(f, node_metrics(sim.trace(), sim.occupancy(), sim.state().node_count()));
  }
  {
    Summary s = summarize(sim.trace(), jobs, sim.options().policy.weights);
    s.emplace_back("policy", std::string(to_string(sim.options().policy.queueing)));
    s.emplace_back("scorer", std::string(to_string(sim.options().policy.scorer)));
    s.emplace_back("backfill_passes", std::to_string(sim.backfill_audit().passes));
    s.emplace_back("backfill_decisions", std::to_string(sim.backfill_audit().decisions));
    s.emplace_back("backfill_head_delays", std::to_string(sim.backfill_audit().head_delays));
    auto f = open("summary.csv");
    write_summary_csv(f, s);
  }
  {
    auto f = open("trace.log");
    sim.trace().write(f);
  }
  if (plot_data) {
    auto f = open("plot_data.csv");
    write_plot_data(f, jobs, sim.occupancy());
  }
}

}  // namespace nvsim
