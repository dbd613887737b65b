#include <gtest/gtest.h>

#include <random>

#include "rig.hpp"

using namespace nvsim;
using namespace nvsim::testing;

namespace {

Bytes tier_sum(const ClusterState& s) {
  Bytes total = 0;
  for (const TierState& t : tier_states(s)) total += t.used;
  return total;
}

}  // namespace

TEST(DistributedFs, FourNodesPoolTheirBapm) {
  StorageRig rig(reference_cluster(4));
  const DistributedFs& fs = mount_distributed_fs(rig.state, 0, {3, 1, 0, 2});
  EXPECT_EQ(fs.capacity(), 12 * TB);
  EXPECT_EQ(fs.bandwidth, 80 * GBps);
  EXPECT_EQ(fs.members, (std::vector<int>{0, 1, 2, 3}));
}

TEST(DistributedFs, AggregateBandwidthScales) {
  ClusterState state(reference_cluster(768));
  std::vector<int> all;
  for (int i = 0; i < 768; ++i) all.push_back(i);
  const DistributedFs& fs = mount_distributed_fs(state, 0, all);
  EXPECT_EQ(fs.bandwidth, 15'360 * GBps);
}

TEST(DistributedFs, FractionLimitsContribution) {
  ClusterSpec c = reference_cluster(2);
  c.distributed_fs_fraction = 0.5;
  ClusterState state(c);
  EXPECT_EQ(mount_distributed_fs(state, 0, {0, 1}).capacity(), 3 * TB);
}

TEST(DistributedFs, MembersNeedPersistentBapm) {
  ClusterSpec c = reference_cluster(2);
  c.nodes[1] = plain_node(1);
  ClusterState state(c);
  EXPECT_EQ(error_of([&] { mount_distributed_fs(state, 0, {0, 1}); }), ErrorCode::MemberWithoutBapm);
  ClusterSpec d = reference_cluster(2);
  d.nodes[1].initial_mode = MemoryMode::DLM;
  ClusterState dlm(d);
  EXPECT_EQ(error_of([&] { mount_distributed_fs(dlm, 0, {0, 1}); }), ErrorCode::MemberWithoutBapm);
}

TEST(DistributedFs, PlacementPrefersMostFreeThenLowestId) {
  StorageRig rig(reference_cluster(3));
  const int fs = mount_distributed_fs(rig.state, 0, {0, 1, 2}).id;
  EXPECT_EQ(place_on_distributed_fs(rig.state, fs, 1 * TB), 0);
  rig.state.add_dataset(DataSet{"a", TB, "alice", "", false});
  Replica r;
  r.dataset = "a";
  r.tier = ReplicaTier::distributed_fs;
  r.node = 0;
  r.fs = fs;
  r.bytes = TB;
  rig.state.add_replica(r);
  EXPECT_EQ(place_on_distributed_fs(rig.state, fs, 1 * TB), 1);
  EXPECT_EQ(error_of([&] { place_on_distributed_fs(rig.state, fs, 4 * TB); }), ErrorCode::TierFull);
}

TEST(Replicas, CapacityErrorsPerTier) {
  ClusterSpec c = reference_cluster(2, 100 * GBps);
  c.external_fs_capacity = 500 * GB;
  c.nodes[1] = plain_node(1);
  StorageRig rig(c);
  rig.external_dataset("big", 400 * GB);
  rig.state.add_dataset(DataSet{"more", 200 * GB, "alice", "", false});
  Replica ext;
  ext.dataset = "more";
  ext.bytes = 200 * GB;
  EXPECT_EQ(error_of([&] { rig.state.add_replica(ext); }), ErrorCode::TierFull);
  rig.state.add_dataset(DataSet{"huge", 4 * TB, "alice", "", false});
  EXPECT_EQ(error_of([&] { rig.node_replica("huge", 0); }), ErrorCode::InsufficientCapacity);
  EXPECT_EQ(error_of([&] { rig.node_replica("big", 1); }), ErrorCode::InsufficientCapacity);
}

TEST(Replicas, TierBytesAreConserved) {
  std::mt19937_64 rng(3);
  StorageRig rig(reference_cluster(4));
  const int fs = mount_distributed_fs(rig.state, 0, {2, 3}).id;
  std::vector<ReplicaId> live;
  Bytes expected = 0;
  for (int i = 0; i < 400; ++i) {
    if (!live.empty() && rng() % 3 == 0) {
      const std::size_t k = rng() % live.size();
      expected -= rig.state.remove_replica(live[k]).bytes;
      live.erase(live.begin() + static_cast<std::ptrdiff_t>(k));
    } else {
      const std::string id = "d" + std::to_string(i);
      const Bytes b = 1 + rng() % (200 * GB);
      rig.state.add_dataset(DataSet{id, b, "alice", "", false});
      Replica r;
      r.dataset = id;
      r.bytes = b;
      const int where = static_cast<int>(rng() % 3);
      if (where == 1) {
        r.tier = ReplicaTier::node_bapm;
        r.node = static_cast<int>(rng() % 2);
      } else if (where == 2) {
        r.tier = ReplicaTier::distributed_fs;
        r.fs = fs;
        r.node = 2 + static_cast<int>(rng() % 2);
      }
      try {
        live.push_back(rig.state.add_replica(r));
        expected += b;
      } catch (const SimError&) {
      }
    }
    ASSERT_EQ(tier_sum(rig.state), expected);
    ASSERT_TRUE(rig.state.audit().empty());
  }
}

TEST(Access, OwnerOrGrantee) {
  ClusterState s(reference_cluster(1));
  const DataSet& d = s.add_dataset(DataSet{"x", GB, "alice", "", false});
  EXPECT_TRUE(s.may_access("alice", d));
  EXPECT_EQ(error_of([&] { s.check_access("bob", d); }), ErrorCode::AccessDenied);
  s.grant("alice", "bob");
  EXPECT_TRUE(s.may_access("bob", d));
  EXPECT_FALSE(s.may_access("carol", d));
}

TEST(Paths, TopologyRoutes) {
  StorageRig rig(reference_cluster(2));
  EXPECT_EQ(rig.res.local(0).size(), 1u);
  EXPECT_EQ(rig.res.bapm_access(0, 0), rig.res.local(0));
  EXPECT_EQ(rig.res.bapm_access(0, 1).size(), 3u);
  EXPECT_EQ(rig.res.bapm_to_bapm(0, 1).size(), 4u);
  EXPECT_EQ(rig.res.external_to_bapm(1).front(), rig.res.external());
}

TEST(IoTime, LocalAndExternalReads) {
  StorageRig rig(reference_cluster(1));
  SimTime local_done{}, ext_done{};
  rig.engine.timer(kSimEpoch, [&] {
    rig.transfers.start(rig.res.local(0), 100 * GB, [&](auto) { local_done = rig.engine.now(); });
  });
  rig.engine.run();
  rig.engine.timer(rig.engine.now(), [&] {
    rig.transfers.start(rig.res.external_io(0), 100 * GB, [&](auto) { ext_done = rig.engine.now(); });
  });
  rig.engine.run();
  EXPECT_EQ(local_done, at_s(5));
  EXPECT_EQ(ext_done - local_done, secs(8));
}

TEST(IoTime, FsOverheadCapsBapmFlows) {
  ClusterSpec c = reference_cluster(1);
  c.fs_overhead = 2.0;
  StorageRig rig(c);
  EXPECT_EQ(fs_overhead_cap(rig.state, rig.res, rig.res.local(0)), 10 * GBps);
  EXPECT_EQ(fs_overhead_cap(rig.state, rig.res, rig.res.external_io(0)), std::nullopt);
}

TEST(Audit, NodeAuditIgnoresTheExternalCatalogue) {
  StorageRig rig(reference_cluster(2));
  for (int i = 0; i < 50; ++i) rig.external_dataset("e" + std::to_string(i), GB);
  rig.node_replica("e0", 1);
  EXPECT_TRUE(rig.state.audit().empty());
  EXPECT_TRUE(rig.state.audit_nodes().empty());
  rig.state.node(1).replica_bytes += 1;
  EXPECT_EQ(rig.state.audit_nodes().size(), 1u);
  EXPECT_EQ(rig.state.audit().size(), 1u);
}
