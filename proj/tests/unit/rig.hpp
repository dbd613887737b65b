#pragma once

#include <string>
#include <vector>

#include "nvsim/data_scheduler.hpp"
#include "nvsim/engine.hpp"
#include "nvsim/state.hpp"
#include "nvsim/storage.hpp"
#include "support.hpp"

namespace nvsim::testing {

/// Engine, transfers, state and staging agent wired to a cluster.
struct StorageRig {
  explicit StorageRig(ClusterSpec spec) : state(std::move(spec)), res(transfers, state.spec()) {}

  void external_dataset(const std::string& id, Bytes bytes, const std::string& owner = "alice") {
    state.add_dataset(DataSet{id, bytes, owner, "", false});
    Replica r;
    r.dataset = id;
    r.tier = ReplicaTier::external_fs;
    r.state = ReplicaState::resident;
    r.bytes = bytes;
    state.add_replica(r);
  }

  ReplicaId node_replica(const std::string& id, int node) {
    Replica r;
    r.dataset = id;
    r.tier = ReplicaTier::node_bapm;
    r.node = node;
    r.state = ReplicaState::resident;
    r.bytes = state.dataset(id).bytes;
    return state.add_replica(r);
  }

  Engine engine;
  TransferService transfers{engine};
  ClusterState state;
  ResourceMap res;
  DataScheduler data{engine, transfers, state, res};
};

}  // namespace nvsim::testing
