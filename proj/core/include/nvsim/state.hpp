#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "nvsim/cluster.hpp"
#include "nvsim/memory_mode.hpp"
#include "nvsim/units.hpp"

namespace nvsim {

enum class ReplicaTier { external_fs, node_bapm, distributed_fs };
enum class ReplicaState { staging, resident };

std::string_view to_string(ReplicaTier t);
std::string_view to_string(ReplicaState s);

using ReplicaId = std::uint64_t;

/// One whole copy of a dataset. Scrubbed replicas are erased, so every
/// replica in the catalogue holds capacity.
struct Replica {
  ReplicaId id = 0;
  std::string dataset;
  ReplicaTier tier = ReplicaTier::external_fs;
  int node = -1;  // host node for B-APM tiers
  int fs = -1;    // distributed file system id
  ReplicaState state = ReplicaState::staging;
  Bytes bytes = 0;
  std::optional<SimTime> expiry;  // set while retained for a workflow
  int reservation_job = -1;       // stored inside this job's B-APM reservation
  int holder_job = -1;            // retained data absorbed by a running job's reservation
  int readers = 0;
  int pending_stage_outs = 0;
  bool scratch = false;
  bool expired = false;  // expiry reached while in use; scrubbed on release

  bool in_use() const { return readers > 0 || pending_stage_outs > 0 || holder_job >= 0; }
};

struct DataSet {
  std::string id;
  Bytes bytes = 0;
  std::string owner;
  std::string workflow;
  bool scratch = false;
};

struct NodeState {
  NodeSpec spec;
  MemoryMode mode = MemoryMode::SLM;
  bool switching = false;
  int job = -1;                 // job holding the node, -1 when idle
  Bytes reserved = 0;           // that job's reservation net of absorbed replicas
  Bytes replica_bytes = 0;      // replicas held outside any reservation
  Bytes reservation_bytes = 0;  // data written inside the job's reservation
  Bytes scrubbed = 0;
  std::uint32_t mode_switches = 0;

  Bytes capacity() const { return spec.bapm_bytes(); }
  /// Persistent capacity not claimed by a reservation or a replica.
  Bytes free_bapm() const;
};

/// Cross-node file system assembled from a job's nodes for its lifetime.
struct DistributedFs {
  int id = -1;
  int job = -1;
  std::vector<int> members;
  std::map<int, Bytes> quota;
  std::map<int, Bytes> used;
  BytesPerSecond bandwidth = 0;  // sum of member B-APM bandwidth
  bool mounted = true;

  Bytes capacity() const;
  Bytes used_total() const;
  Bytes free_on(int member) const { return quota.at(member) - used.at(member); }
};

/// Live occupancy of the cluster: node modes, reservations, datasets and their
/// replicas, and the per-tier byte counters kept in step with the catalogue.
class ClusterState {
 public:
  explicit ClusterState(ClusterSpec spec);

  const ClusterSpec& spec() const { return spec_; }
  std::size_t node_count() const { return nodes_.size(); }
  NodeState& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  const NodeState& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const std::vector<NodeState>& nodes() const { return nodes_; }

  DataSet& add_dataset(DataSet d);
  const DataSet* find_dataset(std::string_view id) const;
  /// Throws UnknownDataset.
  const DataSet& dataset(std::string_view id) const;

  void grant(const std::string& owner, const std::string& principal) { grants_[owner].insert(principal); }
  bool may_access(std::string_view principal, const DataSet& d) const;
  /// Throws AccessDenied unless the principal owns the dataset or holds a grant.
  void check_access(std::string_view principal, const DataSet& d) const;

  /// Registers a replica and debits the tier it lives on. Node tiers throw
  /// InsufficientCapacity when the node cannot hold it, distributed file
  /// systems and the external file system throw TierFull.
  ReplicaId add_replica(Replica r);
  /// Erases the replica and credits its tier; the record is returned.
  Replica remove_replica(ReplicaId id);
  Replica& replica(ReplicaId id) { return replicas_.at(id); }
  const Replica& replica(ReplicaId id) const { return replicas_.at(id); }
  Replica* find_replica(ReplicaId id);
  bool has_replica(ReplicaId id) const { return replicas_.contains(id); }
  const std::map<ReplicaId, Replica>& replicas() const { return replicas_; }
  std::vector<ReplicaId> replicas_of(std::string_view dataset) const;
  std::vector<ReplicaId> replicas_on(int node) const;
  /// Moves a replica stored inside a reservation out into ordinary node
  /// storage (or back into one with job >= 0).
  void set_reservation(ReplicaId id, int job);

  /// Resident replica of the dataset on the node's B-APM, if any.
  std::optional<ReplicaId> resident_on(std::string_view dataset, int node) const;
  Bytes resident_input_bytes(const std::vector<std::string>& datasets, int node) const;

  DistributedFs& add_fs(DistributedFs fs);
  /// Turns a distributed-fs replica into a plain replica on its host node.
  void detach_from_fs(ReplicaId id);
  DistributedFs& fs(int id) { return fs_.at(id); }
  const DistributedFs& fs(int id) const { return fs_.at(id); }
  const std::map<int, DistributedFs>& filesystems() const { return fs_; }

  Bytes external_used() const { return external_used_; }

  /// Recomputes every counter from the replica catalogue and checks the
  /// capacity bounds. Returns one message per violation.
  std::vector<std::string> audit() const;
  /// Same checks restricted to node-resident replicas and mounted file
  /// systems; cost does not grow with the external catalogue.
  std::vector<std::string> audit_nodes() const;

 private:
  std::vector<std::string> audit(bool whole_catalogue) const;

  ClusterSpec spec_;
  std::vector<NodeState> nodes_;
  std::map<std::string, DataSet, std::less<>> datasets_;
  std::map<std::string, std::set<std::string>, std::less<>> grants_;
  std::map<ReplicaId, Replica> replicas_;
  std::map<std::string, std::set<ReplicaId>, std::less<>> by_dataset_;
  std::vector<std::set<ReplicaId>> by_node_;
  std::map<int, DistributedFs> fs_;
  Bytes external_used_ = 0;
  ReplicaId next_replica_ = 1;
  int next_fs_ = 0;
};

}  // namespace nvsim
