#pragma once

#include <functional>
#include <string>
#include <string_view>

#include "nvsim/engine.hpp"
#include "nvsim/state.hpp"
#include "nvsim/storage.hpp"

namespace nvsim {

/// Where a job on some node finds a dataset.
struct AccessPath {
  enum class Kind { local, remote_bapm, external };
  Kind kind = Kind::external;
  int node = -1;  // hosting node for local and remote-bapm
  ReplicaId replica = 0;

  friend bool operator==(const AccessPath&, const AccessPath&) = default;
};

/// "local", "remote-bapm(3)" or "external".
std::string to_string(const AccessPath& p);

/// Staging agent: copies datasets onto and off node B-APM, moves them
/// between nodes, resolves access paths and owns replica cleanup (scrubbing
/// and retention expiry). Every movement is a bandwidth-shared transfer.
class DataScheduler {
 public:
  using Done = std::function<void(ReplicaId)>;

  DataScheduler(Engine& engine, TransferService& transfers, ClusterState& state, const ResourceMap& resources);

  struct Target {
    int node = -1;
    int fs = -1;  // >= 0: the replica is placed in this distributed file system
  };

  /// Copies a dataset onto the target. The source is the resident B-APM
  /// replica with the fewest readers (ties: lowest node id), else the external
  /// copy. The new replica is `staging` until the transfer completes, then
  /// `resident`, and `done` runs. A replica already resident on the target
  /// node is reused without a transfer.
  /// Throws UnknownDataset, AccessDenied, InsufficientCapacity or TierFull.
  ReplicaId stage_in(std::string_view dataset, std::string_view principal, Target target, Fields tags = {},
                     Done done = {});

  /// Copies a resident node replica to the external file system and returns
  /// the external replica. Afterwards the node replica is scrubbed unless it
  /// is retained or still in use. Throws UnknownDataset or TierFull.
  ReplicaId stage_out(ReplicaId source, Fields tags = {}, Done done = {});
  /// Stage-out of a dataset from whichever node holds a resident copy.
  ReplicaId stage_out(std::string_view dataset, Fields tags = {}, Done done = {});

  /// Moves a resident replica from `src` to `dst`; the source copy is
  /// scrubbed on completion unless retained. src == dst completes at once.
  /// Throws UnknownDataset or InsufficientCapacity.
  ReplicaId move_intra_cluster(std::string_view dataset, int src, int dst, Fields tags = {}, Done done = {});

  /// Local replica, else the remote B-APM replica with the fewest readers
  /// (ties: lowest node id), else external. Throws AccessDenied, or
  /// UnknownDataset when no resident copy exists anywhere.
  AccessPath resolve_access(std::string_view principal, std::string_view dataset, int node) const;

  /// Deletes a replica, frees its capacity and records a scrub event.
  void scrub(ReplicaId id, std::string_view reason, Fields tags = {});
  /// Scrubs every replica hosted on the node; returns the bytes freed.
  Bytes scrub_node(int node, std::string_view reason, Fields tags = {});

  /// Keeps a replica until `expiry`; at that time it is scrubbed, or as soon
  /// as it stops being used if it is busy then.
  void retain(ReplicaId id, SimTime expiry);
  /// Call after dropping a reader, holder or pending stage-out.
  void release(ReplicaId id);

  std::size_t in_flight() const { return in_flight_; }

 private:
  std::optional<ReplicaId> best_bapm_source(std::string_view dataset, int exclude_node) const;
  std::optional<ReplicaId> external_replica(std::string_view dataset) const;
  TransferService::TransferId transfer(const ResourceMap::Path& path, Bytes bytes, std::function<void()> on_done);
  void on_expiry(ReplicaId id, SimTime at);
  static std::string where(const Replica& r);

  Engine& engine_;
  TransferService& transfers_;
  ClusterState& state_;
  const ResourceMap& res_;
  std::size_t in_flight_ = 0;
};

}  // namespace nvsim
