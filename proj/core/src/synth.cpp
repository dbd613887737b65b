#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "nvsim/error.hpp"
#include "nvsim/workload.hpp"

namespace nvsim {
namespace {

// Portable distribution mappings.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 gen_;
};

double fraction_for(Bytes bytes, BytesPerSecond ref, SimDuration compute) {
  const double io = static_cast<double>(bytes) / static_cast<double>(ref);
  const double cpu = static_cast<double>(compute.count()) * 1e-9;
  return io + cpu > 0 ? io / (cpu + io) : 0.0;
}

struct Draft {
  JobSpec job;
  Bytes total = 0;
  BytesPerSecond ref = 0;
};

}  // namespace

BytesPerSecond reference_bandwidth(const ClusterSpec& cluster, const SynthParams& params, std::uint32_t job_nodes) {
  if (cluster.nodes.empty() || cluster.external_fs_bw == 0) {
    throw SimError(ErrorCode::NonPositiveParameter, "reference bandwidth needs nodes and an external file system");
  }
  const std::uint64_t mean_nodes2 = std::uint64_t{params.min_nodes} + params.max_nodes;  // twice the mean
  std::uint64_t concurrency = mean_nodes2 == 0 ? 1 : (2 * cluster.nodes.size()) / mean_nodes2;
  concurrency = std::clamp<std::uint64_t>(concurrency, 1, std::max<std::uint64_t>(1, params.jobs));
  BytesPerSecond link = cluster.nodes.front().link_bw;
  for (const NodeSpec& n : cluster.nodes) link = std::min(link, n.link_bw);
  const BytesPerSecond share = cluster.external_fs_bw / concurrency;
  return std::max<BytesPerSecond>(1, std::min<BytesPerSecond>(share, link * std::max<std::uint32_t>(1, job_nodes)));
}

double declared_io_fraction(const WorkloadSpec& spec, const JobSpec& job, const ClusterSpec& cluster,
                            const SynthParams& params) {
  return fraction_for(declared_io_bytes(spec, job), reference_bandwidth(cluster, params, job.nodes_requested),
                      job.compute_seconds);
}

WorkloadSpec synth_workload(const SynthParams& p, const ClusterSpec& cluster) {
  if (cluster.nodes.empty()) throw SimError(ErrorCode::NonPositiveParameter, "cannot synthesize for an empty cluster");
  if (!(p.io_fraction_lo >= 0.0 && p.io_fraction_lo <= p.io_fraction_hi && p.io_fraction_hi < 1.0)) {
    throw SimError(ErrorCode::InvalidArgument, "io fraction range must satisfy 0 <= lo <= hi < 1");
  }
  if (p.min_nodes == 0 || p.min_nodes > p.max_nodes) throw SimError(ErrorCode::InvalidArgument, "bad node-count range");
  if (p.min_compute.count() < 0 || p.min_compute > p.max_compute) {
    throw SimError(ErrorCode::InvalidArgument, "bad compute-time range");
  }
  if (p.walltime_factor < 1.0) throw SimError(ErrorCode::InvalidArgument, "walltime factor must be at least 1");
  if (p.principals == 0) throw SimError(ErrorCode::InvalidArgument, "need at least one principal");

  Rng rng(p.seed);
  const auto cluster_nodes = static_cast<std::uint32_t>(cluster.nodes.size());
  std::uint32_t bapm_nodes = 0;
  std::uint32_t dlm_nodes = 0;
  Bytes cap_min = 0;
  for (const NodeSpec& n : cluster.nodes) {
    if (!n.has_bapm()) continue;
    cap_min = bapm_nodes == 0 ? n.bapm_bytes() : std::min(cap_min, n.bapm_bytes());
    ++bapm_nodes;
    if (supports_dlm(n)) ++dlm_nodes;
  }
  const std::uint32_t max_nodes = std::min(p.max_nodes, cluster_nodes);
  const std::uint32_t min_nodes = std::min(p.min_nodes, max_nodes);

  WorkloadSpec spec;
  std::vector<Draft> drafts;
  std::vector<std::pair<std::size_t, std::size_t>> chains;  // [first, last) job ranges

  SimTime submit = kSimEpoch;
  while (drafts.size() < p.jobs) {
    std::size_t length = 1;
    const std::size_t left = p.jobs - drafts.size();
    if (left >= 2 && p.max_workflow_depth >= 2 && rng.chance(p.workflow_probability)) {
      length = static_cast<std::size_t>(rng.between(2, std::min<std::int64_t>(p.max_workflow_depth, left)));
    }
    const std::size_t first = drafts.size();
    for (std::size_t c = 0; c < length; ++c) {
      Draft d;
      JobSpec& j = d.job;
      j.job_id = fmt::format("j{}", drafts.size());
      j.owner = fmt::format("u{}", rng.below(p.principals));
      j.submit_time = submit;
      submit += SimDuration{rng.between(0, 2 * p.mean_interarrival.count())};
      j.nodes_requested = static_cast<std::uint32_t>(rng.between(min_nodes, max_nodes));
      j.compute_seconds = SimDuration{rng.between(p.min_compute.count(), p.max_compute.count())};
      // Chain members share an owner.
      if (c > 0) j.owner = drafts[first].job.owner;
      const bool dlm_ok = length == 1 && j.nodes_requested <= dlm_nodes;
      j.required_mode = dlm_ok && rng.chance(p.dlm_probability) ? MemoryMode::DLM : MemoryMode::SLM;
      if (j.required_mode == MemoryMode::DLM) {
        j.dlm_hit_rate = static_cast<double>(rng.between(50, 100)) / 100.0;
      }

      const double f = p.io_fraction_lo + (p.io_fraction_hi - p.io_fraction_lo) * rng.unit();
      d.ref = reference_bandwidth(cluster, p, j.nodes_requested);
      const double io_seconds = f / (1.0 - f) * (static_cast<double>(j.compute_seconds.count()) * 1e-9);
      auto total = static_cast<Bytes>(std::llround(io_seconds * static_cast<double>(d.ref)));
      while (total > 0 && fraction_for(total, d.ref, j.compute_seconds) > p.io_fraction_hi) --total;
      while (fraction_for(total, d.ref, j.compute_seconds) < p.io_fraction_lo) ++total;
      d.total = total;
      drafts.push_back(std::move(d));
    }
    if (length > 1) chains.emplace_back(first, first + length);
  }

  std::vector<std::size_t> chain_of(drafts.size(), SIZE_MAX);
  for (std::size_t c = 0; c < chains.size(); ++c) {
    WorkflowSpec w;
    w.id = fmt::format("w{}", c);
    w.retention_ttl = p.retention_ttl;
    for (std::size_t i = chains[c].first; i < chains[c].second; ++i) {
      chain_of[i] = c;
      drafts[i].job.workflow_id = w.id;
      drafts[i].job.retain_outputs = true;
      if (i > chains[c].first) w.dependencies[drafts[i].job.job_id] = {drafts[i - 1].job.job_id};
    }
    spec.workflows.push_back(std::move(w));
  }

  std::size_t dataset_counter = 0;
  for (std::size_t i = 0; i < drafts.size(); ++i) {
    JobSpec& j = drafts[i].job;
    const Bytes total = drafts[i].total;
    const bool slm = j.required_mode == MemoryMode::SLM;
    const bool bapm_job = slm && j.nodes_requested <= bapm_nodes && cap_min > 0;
    const std::size_t c = chain_of[i];
    const bool feeds_next = c != SIZE_MAX && i + 1 < chains[c].second;
    const bool fed = c != SIZE_MAX && i > chains[c].first;

    Bytes in_bytes = total * 4 / 10;
    Bytes out_bytes = total * 3 / 10;
    if (feeds_next) out_bytes = std::min(out_bytes, drafts[i + 1].total * 4 / 10);
    const Bytes ckpt_bytes = total - in_bytes - out_bytes;

    Bytes fresh_in = in_bytes;
    if (fed) {
      const OutputSpec& prev = drafts[i - 1].job.outputs.front();
      j.inputs.push_back(prev.id);
      fresh_in -= prev.bytes;
    }
    if (fresh_in > 0) {
      DataSetSpec ds;
      ds.id = fmt::format("d{}", dataset_counter++);
      ds.size = fresh_in;
      ds.owner = j.owner;
      if (p.principals > 1 && rng.chance(p.foreign_input_probability)) {
        ds.owner = fmt::format("u{}", (std::stoul(j.owner.substr(1)) + 1 + rng.below(p.principals - 1)) % p.principals);
        if (rng.chance(p.grant_probability)) {
          auto g = std::find_if(spec.grants.begin(), spec.grants.end(), [&](const Grant& x) { return x.owner == ds.owner; });
          if (g == spec.grants.end()) {
            spec.grants.push_back(Grant{ds.owner, {}});
            g = spec.grants.end() - 1;
          }
          if (std::find(g->principals.begin(), g->principals.end(), j.owner) == g->principals.end()) {
            g->principals.push_back(j.owner);
          }
        }
      }
      j.inputs.push_back(ds.id);
      spec.datasets.push_back(std::move(ds));
    }

    const Bytes per_node_inputs = in_bytes;
    Bytes local_need = 0;
    if (bapm_job) {
      const std::uint64_t pick = rng.below(3);
      if (rng.chance(p.stage_probability)) {
        j.stage_inputs = pick == 0 && per_node_inputs <= cap_min / 4 ? StageMode::local_fs : StageMode::distributed_fs;
      }
    }

    if (ckpt_bytes > 0) {
      const auto phases = static_cast<std::uint32_t>(rng.between(1, 3));
      Tier tier = Tier::external_fs;
      if (bapm_job) {
        const std::uint64_t t = rng.below(3);
        tier = t == 0 ? Tier::local_fs : (t == 1 ? Tier::distributed_fs : Tier::external_fs);
        const Bytes per_node = ckpt_bytes / j.nodes_requested + 3;
        if (tier == Tier::local_fs && per_node > cap_min / 2) tier = Tier::distributed_fs;
        if (tier == Tier::local_fs) local_need += per_node;
      }
      Bytes left = ckpt_bytes;
      for (std::uint32_t k = 0; k < phases; ++k) {
        IoPhase ph;
        ph.bytes = k + 1 == phases ? left : ckpt_bytes / phases;
        left -= ph.bytes;
        ph.offset = j.compute_seconds * (k + 1) / (phases + 1);
        ph.direction = Direction::write;
        ph.tier = tier;
        ph.checkpoint = true;
        if (ph.bytes > 0) j.io_phases.push_back(ph);
      }
    }

    if (out_bytes > 0) {
      OutputSpec o;
      o.id = fmt::format("o{}", i);
      o.bytes = out_bytes;
      o.tier = Tier::external_fs;
      if (bapm_job) {
        const std::uint64_t t = rng.below(3);
        o.tier = t == 0 ? Tier::local_fs : (t == 1 ? Tier::distributed_fs : Tier::external_fs);
        if (o.tier == Tier::local_fs && local_need + out_bytes > cap_min / 2) o.tier = Tier::distributed_fs;
        if (o.tier == Tier::local_fs) local_need += out_bytes;
      }
      o.stage_out = o.tier != Tier::external_fs && (feeds_next || rng.chance(p.stage_out_probability));
      j.outputs.push_back(std::move(o));
    }
    if (feeds_next && j.outputs.empty()) {
      // Zero-byte link in the chain.
      j.outputs.push_back(OutputSpec{fmt::format("o{}", i), 0, Tier::external_fs, false});
    }
    if (feeds_next) {
      const std::string& wf = j.workflow_id;
      auto w = std::find_if(spec.workflows.begin(), spec.workflows.end(), [&](const WorkflowSpec& x) { return x.id == wf; });
      w->shared_datasets.push_back(j.outputs.front().id);
    }

    if (bapm_job) {
      const Bytes staged = j.stage_inputs == StageMode::local_fs ? per_node_inputs : 0;
      const Bytes room = cap_min - std::min(cap_min, staged);
      const Bytes base = static_cast<Bytes>(rng.between(static_cast<std::int64_t>(cap_min / 16), static_cast<std::int64_t>(cap_min / 4)));
      j.bapm_bytes_per_node = std::min(room, std::max(base, local_need));
    } else if (j.required_mode == MemoryMode::DLM) {
      j.bapm_bytes_per_node = static_cast<Bytes>(rng.between(static_cast<std::int64_t>(cap_min / 8), static_cast<std::int64_t>(cap_min / 2)));
    }

    const double io_ns = static_cast<double>(total) / static_cast<double>(drafts[i].ref) * 1e9;
    const double wall = (static_cast<double>(j.compute_seconds.count()) + io_ns) * p.walltime_factor;
    j.walltime_limit = std::max(j.compute_seconds, SimDuration{static_cast<std::int64_t>(std::ceil(wall))});
  }

  for (Draft& d : drafts) spec.jobs.push_back(std::move(d.job));
  validate_workload(spec);
  return spec;
}

}  // namespace nvsim
