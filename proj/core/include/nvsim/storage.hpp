#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nvsim/engine.hpp"
#include "nvsim/flow.hpp"
#include "nvsim/state.hpp"

namespace nvsim {

/// Bandwidth resources of the flat full-bisection topology: one injection
/// link and one B-APM device per node, and the external file system.
class ResourceMap {
 public:
  ResourceMap() = default;
  ResourceMap(TransferService& transfers, const ClusterSpec& spec);

  flow::ResourceId link(int node) const { return link_.at(static_cast<std::size_t>(node)); }
  /// Throws InsufficientCapacity for nodes without B-APM.
  flow::ResourceId bapm(int node) const;
  bool has_bapm(int node) const { return bapm_.at(static_cast<std::size_t>(node)).has_value(); }
  flow::ResourceId external() const { return external_; }

  using Path = std::vector<flow::ResourceId>;
  /// Node-local file-system access.
  Path local(int node) const { return {bapm(node)}; }
  /// `client` reading or writing B-APM hosted on `host`.
  Path bapm_access(int host, int client) const;
  /// Node I/O straight to the external file system.
  Path external_io(int node) const { return {link(node), external_}; }
  Path external_to_bapm(int node) const { return {external_, link(node), bapm(node)}; }
  Path bapm_to_external(int node) const { return {bapm(node), link(node), external_}; }
  Path bapm_to_bapm(int src, int dst) const;

 private:
  std::vector<flow::ResourceId> link_;
  std::vector<std::optional<flow::ResourceId>> bapm_;
  flow::ResourceId external_ = 0;
};

/// Per-flow ceiling for file-system access to B-APM when the cluster sets a
/// file-system overhead above 1.0 (no ceiling otherwise).
std::optional<BytesPerSecond> fs_overhead_cap(const ClusterState& state, const ResourceMap& res,
                                              const ResourceMap::Path& path);

/// Mounts a distributed file system over the given nodes. Each member
/// contributes the configured fraction of its unreserved B-APM; the aggregate
/// bandwidth is the sum of member B-APM bandwidths.
DistributedFs& mount_distributed_fs(ClusterState& state, int job, const std::vector<int>& nodes);

/// Member with the most free space that can hold `bytes` (ties: lowest id).
/// Throws TierFull when none can.
int place_on_distributed_fs(const ClusterState& state, int fs, Bytes bytes);

struct TierState {
  std::string tier;  // "local:<node>", "distributed:<fs>" or "external"
  Bytes capacity = 0;
  Bytes used = 0;
  BytesPerSecond bandwidth = 0;
};

/// Capacity and usage of every tier, computed from the replica catalogue.
std::vector<TierState> tier_states(const ClusterState& state);

}  // namespace nvsim
