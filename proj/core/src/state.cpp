#include "nvsim/state.hpp"

#include <fmt/format.h>

#include "nvsim/error.hpp"

namespace nvsim {

std::string_view to_string(ReplicaTier t) {
  switch (t) {
    case ReplicaTier::external_fs: return "external-fs";
    case ReplicaTier::node_bapm: return "node-bapm";
    case ReplicaTier::distributed_fs: return "distributed-fs";
  }
  return "?";
}

std::string_view to_string(ReplicaState s) { return s == ReplicaState::staging ? "staging" : "resident"; }

Bytes NodeState::free_bapm() const {
  const Bytes used = reserved + replica_bytes;
  return used >= capacity() ? 0 : capacity() - used;
}

Bytes DistributedFs::capacity() const {
  Bytes total = 0;
  for (const auto& [m, q] : quota) total += q;
  return total;
}

Bytes DistributedFs::used_total() const {
  Bytes total = 0;
  for (const auto& [m, u] : used) total += u;
  return total;
}

ClusterState::ClusterState(ClusterSpec spec) : spec_(std::move(spec)), by_node_(spec_.nodes.size()) {
  nodes_.reserve(spec_.nodes.size());
  for (const NodeSpec& n : spec_.nodes) {
    NodeState s;
    s.spec = n;
    s.mode = n.initial_mode;
    nodes_.push_back(s);
  }
}

DataSet& ClusterState::add_dataset(DataSet d) {
  auto [it, inserted] = datasets_.emplace(d.id, d);
  if (!inserted) throw SimError(ErrorCode::InvalidArgument, fmt::format("dataset '{}' already exists", d.id));
  return it->second;
}

const DataSet* ClusterState::find_dataset(std::string_view id) const {
  auto it = datasets_.find(id);
  return it == datasets_.end() ? nullptr : &it->second;
}

const DataSet& ClusterState::dataset(std::string_view id) const {
  const DataSet* d = find_dataset(id);
  if (!d) throw SimError(ErrorCode::UnknownDataset, fmt::format("unknown dataset '{}'", id));
  return *d;
}

bool ClusterState::may_access(std::string_view principal, const DataSet& d) const {
  if (d.owner == principal) return true;
  auto it = grants_.find(d.owner);
  return it != grants_.end() && it->second.contains(std::string(principal));
}

void ClusterState::check_access(std::string_view principal, const DataSet& d) const {
  if (!may_access(principal, d)) {
    throw SimError(ErrorCode::AccessDenied,
                   fmt::format("'{}' may not access dataset '{}' owned by '{}'", principal, d.id, d.owner));
  }
}

ReplicaId ClusterState::add_replica(Replica r) {
  if (!find_dataset(r.dataset)) throw SimError(ErrorCode::UnknownDataset, fmt::format("unknown dataset '{}'", r.dataset));
  if (r.tier == ReplicaTier::external_fs) {
    if (r.bytes > spec_.external_fs_capacity - std::min(spec_.external_fs_capacity, external_used_)) {
      throw SimError(ErrorCode::TierFull, fmt::format("external file system cannot hold {} more bytes", r.bytes));
    }
    external_used_ += r.bytes;
  } else {
    NodeState& n = node(r.node);
    if (!n.spec.has_bapm()) {
      throw SimError(ErrorCode::InsufficientCapacity, fmt::format("node {} has no B-APM", r.node));
    }
    if (n.mode != MemoryMode::SLM) {
      throw SimError(ErrorCode::InsufficientCapacity, fmt::format("node {} is in DLM and holds no persistent data", r.node));
    }
    if (r.tier == ReplicaTier::distributed_fs) {
      DistributedFs& f = fs(r.fs);
      if (r.reservation_job >= 0) throw SimError(ErrorCode::InvalidArgument, "file-system data cannot sit in a reservation");
      if (r.bytes > f.free_on(r.node)) {
        throw SimError(ErrorCode::TierFull, fmt::format("distributed fs {} member {} is full", r.fs, r.node));
      }
    }
    if (r.reservation_job >= 0) {
      n.reservation_bytes += r.bytes;
    } else {
      if (r.bytes > n.free_bapm()) {
        throw SimError(ErrorCode::InsufficientCapacity,
                       fmt::format("node {} has {} free B-APM bytes, {} needed", r.node, n.free_bapm(), r.bytes));
      }
      n.replica_bytes += r.bytes;
    }
    if (r.tier == ReplicaTier::distributed_fs) fs(r.fs).used[r.node] += r.bytes;
  }
  r.id = next_replica_++;
  by_dataset_[r.dataset].insert(r.id);
  if (r.node >= 0) by_node_.at(static_cast<std::size_t>(r.node)).insert(r.id);
  const ReplicaId id = r.id;
  replicas_.emplace(id, std::move(r));
  return id;
}

Replica ClusterState::remove_replica(ReplicaId id) {
  auto it = replicas_.find(id);
  if (it == replicas_.end()) throw SimError(ErrorCode::InvalidArgument, fmt::format("no replica {}", id));
  Replica r = std::move(it->second);
  replicas_.erase(it);
  if (r.tier == ReplicaTier::external_fs) {
    external_used_ -= r.bytes;
  } else {
    NodeState& n = node(r.node);
    if (r.reservation_job >= 0) {
      n.reservation_bytes -= r.bytes;
    } else {
      n.replica_bytes -= r.bytes;
    }
    if (r.tier == ReplicaTier::distributed_fs) fs(r.fs).used[r.node] -= r.bytes;
    by_node_.at(static_cast<std::size_t>(r.node)).erase(id);
  }
  auto d = by_dataset_.find(r.dataset);
  d->second.erase(id);
  if (d->second.empty()) by_dataset_.erase(d);
  return r;
}

Replica* ClusterState::find_replica(ReplicaId id) {
  auto it = replicas_.find(id);
  return it == replicas_.end() ? nullptr : &it->second;
}

std::vector<ReplicaId> ClusterState::replicas_of(std::string_view dataset) const {
  auto it = by_dataset_.find(dataset);
  if (it == by_dataset_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

std::vector<ReplicaId> ClusterState::replicas_on(int n) const {
  const auto& s = by_node_.at(static_cast<std::size_t>(n));
  return {s.begin(), s.end()};
}

void ClusterState::set_reservation(ReplicaId id, int job) {
  Replica& r = replicas_.at(id);
  if ((r.reservation_job >= 0) == (job >= 0)) {
    r.reservation_job = job;
    return;
  }
  NodeState& n = node(r.node);
  if (job >= 0) {
    n.replica_bytes -= r.bytes;
    n.reservation_bytes += r.bytes;
  } else {
    n.reservation_bytes -= r.bytes;
    n.replica_bytes += r.bytes;
  }
  r.reservation_job = job;
}

std::optional<ReplicaId> ClusterState::resident_on(std::string_view dataset, int n) const {
  auto it = by_dataset_.find(dataset);
  if (it == by_dataset_.end()) return std::nullopt;
  for (ReplicaId id : it->second) {
    const Replica& r = replicas_.at(id);
    if (r.node == n && r.state == ReplicaState::resident) return id;
  }
  return std::nullopt;
}

Bytes ClusterState::resident_input_bytes(const std::vector<std::string>& datasets, int n) const {
  Bytes total = 0;
  for (const std::string& d : datasets) {
    if (auto id = resident_on(d, n)) total += replicas_.at(*id).bytes;
  }
  return total;
}

DistributedFs& ClusterState::add_fs(DistributedFs f) {
  f.id = next_fs_++;
  for (int m : f.members) f.used.emplace(m, 0);
  return fs_.emplace(f.id, std::move(f)).first->second;
}

void ClusterState::detach_from_fs(ReplicaId id) {
  Replica& r = replicas_.at(id);
  if (r.tier != ReplicaTier::distributed_fs) return;
  fs(r.fs).used[r.node] -= r.bytes;
  r.tier = ReplicaTier::node_bapm;
  r.fs = -1;
}

std::vector<std::string> ClusterState::audit() const { return audit(true); }

std::vector<std::string> ClusterState::audit_nodes() const { return audit(false); }

std::vector<std::string> ClusterState::audit(bool whole_catalogue) const {
  std::vector<std::string> out;
  std::vector<Bytes> replica_bytes(nodes_.size(), 0);
  std::vector<Bytes> reservation_bytes(nodes_.size(), 0);
  std::map<int, std::map<int, Bytes>> fs_used;
  Bytes external = 0;
  const auto visit = [&](ReplicaId id, const Replica& r) {
    if (r.tier == ReplicaTier::external_fs) {
      external += r.bytes;
      return;
    }
    const auto n = static_cast<std::size_t>(r.node);
    (r.reservation_job >= 0 ? reservation_bytes : replica_bytes)[n] += r.bytes;
    if (r.tier == ReplicaTier::distributed_fs) fs_used[r.fs][r.node] += r.bytes;
    if (nodes_[n].mode == MemoryMode::DLM) {
      out.push_back(fmt::format("node {} is in DLM but holds replica {} of '{}'", r.node, id, r.dataset));
    }
  };
  if (whole_catalogue) {
    for (const auto& [id, r] : replicas_) visit(id, r);
  } else {
    for (const auto& ids : by_node_) {
      for (ReplicaId id : ids) visit(id, replicas_.at(id));
    }
  }
  if (whole_catalogue && external != external_used_) {
    out.push_back(fmt::format("external tier counter {} != resident sum {}", external_used_, external));
  }
  if (external_used_ > spec_.external_fs_capacity) out.push_back("external tier over capacity");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const NodeState& n = nodes_[i];
    if (n.replica_bytes != replica_bytes[i]) {
      out.push_back(fmt::format("node {} replica counter {} != resident sum {}", i, n.replica_bytes, replica_bytes[i]));
    }
    if (n.reservation_bytes != reservation_bytes[i]) {
      out.push_back(fmt::format("node {} reservation counter {} != resident sum {}", i, n.reservation_bytes,
                                reservation_bytes[i]));
    }
    if (static_cast<unsigned __int128>(n.reserved) + n.replica_bytes > n.capacity()) {
      out.push_back(fmt::format("node {} oversubscribed: reserved {} + replicas {} > capacity {}", i, n.reserved,
                                n.replica_bytes, n.capacity()));
    }
    if (n.job < 0 && (n.reserved != 0 || n.reservation_bytes != 0)) {
      out.push_back(fmt::format("idle node {} still carries a reservation", i));
    }
  }
  for (const auto& [id, f] : fs_) {
    if (!whole_catalogue && !f.mounted) continue;
    for (const auto& [m, used] : f.used) {
      const Bytes expect = fs_used.count(id) && fs_used.at(id).count(m) ? fs_used.at(id).at(m) : 0;
      if (used != expect) out.push_back(fmt::format("fs {} member {} counter {} != resident sum {}", id, m, used, expect));
      if (used > f.quota.at(m)) out.push_back(fmt::format("fs {} member {} over quota", id, m));
    }
  }
  return out;
}

}  // namespace nvsim
