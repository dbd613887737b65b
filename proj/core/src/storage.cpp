#include "nvsim/storage.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "nvsim/error.hpp"

namespace nvsim {

ResourceMap::ResourceMap(TransferService& transfers, const ClusterSpec& spec) {
  for (const NodeSpec& n : spec.nodes) {
    link_.push_back(transfers.add_resource(fmt::format("link{}", n.node_id), n.link_bw));
    if (n.has_bapm() && n.bapm_bw > 0) {
      bapm_.emplace_back(transfers.add_resource(fmt::format("bapm{}", n.node_id), n.bapm_bw));
    } else {
      bapm_.emplace_back(std::nullopt);
    }
  }
  external_ = transfers.add_resource("external", spec.external_fs_bw);
}

flow::ResourceId ResourceMap::bapm(int node) const {
  const auto& r = bapm_.at(static_cast<std::size_t>(node));
  if (!r) throw SimError(ErrorCode::InsufficientCapacity, fmt::format("node {} has no B-APM", node));
  return *r;
}

ResourceMap::Path ResourceMap::bapm_access(int host, int client) const {
  if (host == client) return local(host);
  return {bapm(host), link(host), link(client)};
}

ResourceMap::Path ResourceMap::bapm_to_bapm(int src, int dst) const {
  if (src == dst) return local(src);
  return {bapm(src), link(src), link(dst), bapm(dst)};
}

std::optional<BytesPerSecond> fs_overhead_cap(const ClusterState& state, const ResourceMap& res,
                                              const ResourceMap::Path& path) {
  const double overhead = state.spec().fs_overhead;
  if (!(overhead > 1.0)) return std::nullopt;
  std::optional<BytesPerSecond> cap;
  for (std::size_t n = 0; n < state.node_count(); ++n) {
    const int node = static_cast<int>(n);
    if (!res.has_bapm(node) || std::find(path.begin(), path.end(), res.bapm(node)) == path.end()) continue;
    const auto c = static_cast<BytesPerSecond>(std::floor(static_cast<double>(state.node(node).spec.bapm_bw) / overhead));
    const BytesPerSecond bounded = std::max<BytesPerSecond>(1, c);
    cap = cap ? std::min(*cap, bounded) : bounded;
  }
  return cap;
}

DistributedFs& mount_distributed_fs(ClusterState& state, int job, const std::vector<int>& nodes) {
  DistributedFs fs;
  fs.job = job;
  const double fraction = state.spec().distributed_fs_fraction;
  for (int n : nodes) {
    const NodeState& ns = state.node(n);
    if (!ns.spec.has_bapm()) {
      throw SimError(ErrorCode::MemberWithoutBapm, fmt::format("node {} has no B-APM to contribute", n));
    }
    if (ns.mode != MemoryMode::SLM) {
      throw SimError(ErrorCode::MemberWithoutBapm, fmt::format("node {} is in DLM and exposes no persistent B-APM", n));
    }
    const Bytes free = ns.free_bapm();
    Bytes contributed = free;
    if (fraction < 1.0) {
      contributed = static_cast<Bytes>(std::floor(static_cast<long double>(free) * static_cast<long double>(fraction)));
    }
    fs.members.push_back(n);
    fs.quota[n] = contributed;
    fs.bandwidth += ns.spec.bapm_bw;
  }
  std::sort(fs.members.begin(), fs.members.end());
  return state.add_fs(std::move(fs));
}

int place_on_distributed_fs(const ClusterState& state, int fs_id, Bytes bytes) {
  const DistributedFs& fs = state.fs(fs_id);
  int best = -1;
  Bytes best_free = 0;
  for (int m : fs.members) {
    const Bytes free = std::min(fs.free_on(m), state.node(m).free_bapm());
    if (free >= bytes && (best < 0 || free > best_free)) {
      best = m;
      best_free = free;
    }
  }
  if (best < 0) throw SimError(ErrorCode::TierFull, fmt::format("distributed fs {} cannot hold {} bytes", fs_id, bytes));
  return best;
}

std::vector<TierState> tier_states(const ClusterState& state) {
  std::vector<TierState> out;
  std::vector<Bytes> local(state.node_count(), 0);
  std::map<int, Bytes> dfs;
  Bytes external = 0;
  for (const auto& [id, r] : state.replicas()) {
    switch (r.tier) {
      case ReplicaTier::external_fs: external += r.bytes; break;
      case ReplicaTier::node_bapm: local[static_cast<std::size_t>(r.node)] += r.bytes; break;
      case ReplicaTier::distributed_fs: dfs[r.fs] += r.bytes; break;
    }
  }
  for (std::size_t n = 0; n < state.node_count(); ++n) {
    const NodeState& ns = state.node(static_cast<int>(n));
    out.push_back(TierState{fmt::format("local:{}", n), ns.capacity(), local[n], ns.spec.bapm_bw});
  }
  for (const auto& [id, fs] : state.filesystems()) {
    if (!fs.mounted) continue;
    out.push_back(TierState{fmt::format("distributed:{}", id), fs.capacity(), dfs[id], fs.bandwidth});
  }
  out.push_back(TierState{"external", state.spec().external_fs_capacity, external, state.spec().external_fs_bw});
  return out;
}

}  // namespace nvsim
