#include <gtest/gtest.h>

#include "rig.hpp"

using namespace nvsim;
using namespace nvsim::testing;

namespace {

std::vector<const Event*> of_kind(const Trace& t, EventKind k) {
  std::vector<const Event*> out;
  for (const Event& e : t.events()) {
    if (e.kind == k) out.push_back(&e);
  }
  return out;
}

}  // namespace

TEST(StageIn, ExternalThroughLink) {
  StorageRig rig(reference_cluster(2));
  rig.external_dataset("in", 300 * GB);
  SimTime done{};
  ReplicaId id = 0;
  rig.engine.timer(kSimEpoch, [&] {
    id = rig.data.stage_in("in", "alice", {1, -1}, {}, [&](ReplicaId) { done = rig.engine.now(); });
    EXPECT_EQ(rig.state.replica(id).state, ReplicaState::staging);
  });
  rig.engine.run();
  EXPECT_EQ(done, at_s(24));
  EXPECT_EQ(rig.state.replica(id).state, ReplicaState::resident);
  EXPECT_EQ(rig.state.resident_on("in", 1), id);
  const auto ends = of_kind(rig.engine.trace(), EventKind::stage_end);
  ASSERT_EQ(ends.size(), 1u);
  EXPECT_EQ(ends[0]->fields.at("src"), "external");
  EXPECT_EQ(ends[0]->fields.at("dst"), "node:1");
}

TEST(StageIn, EmptyDatasetCompletesImmediately) {
  StorageRig rig(reference_cluster(1));
  rig.external_dataset("empty", 0);
  SimTime done = at_s(-1);
  rig.engine.timer(at_s(2), [&] { rig.data.stage_in("empty", "alice", {0, -1}, {}, [&](auto) { done = rig.engine.now(); }); });
  rig.engine.run();
  EXPECT_EQ(done, at_s(2));
}

TEST(StageIn, ReusesResidentCopy) {
  StorageRig rig(reference_cluster(1));
  rig.external_dataset("in", 10 * GB);
  const ReplicaId local = rig.node_replica("in", 0);
  ReplicaId got = 0;
  rig.engine.timer(kSimEpoch, [&] { got = rig.data.stage_in("in", "alice", {0, -1}); });
  rig.engine.run();
  EXPECT_EQ(got, local);
  EXPECT_TRUE(of_kind(rig.engine.trace(), EventKind::stage_start).empty());
}

TEST(StageIn, PrefersBapmSource) {
  StorageRig rig(reference_cluster(3));
  rig.external_dataset("in", 50 * GB);
  rig.node_replica("in", 2);
  rig.engine.timer(kSimEpoch, [&] { rig.data.stage_in("in", "alice", {0, -1}); });
  rig.engine.run();
  const auto starts = of_kind(rig.engine.trace(), EventKind::stage_start);
  ASSERT_EQ(starts.size(), 1u);
  EXPECT_EQ(starts[0]->fields.at("src"), "node:2");
  EXPECT_EQ(rig.engine.now(), at_s(4));
}

TEST(StageIn, Errors) {
  ClusterSpec c = reference_cluster(2);
  c.nodes[1] = plain_node(1);
  StorageRig rig(c);
  rig.external_dataset("huge", 4 * TB);
  rig.external_dataset("secret", GB, "bob");
  EXPECT_EQ(error_of([&] { rig.data.stage_in("huge", "alice", {0, -1}); }), ErrorCode::InsufficientCapacity);
  EXPECT_EQ(error_of([&] { rig.data.stage_in("secret", "alice", {0, -1}); }), ErrorCode::AccessDenied);
  EXPECT_EQ(error_of([&] { rig.data.stage_in("nope", "alice", {0, -1}); }), ErrorCode::UnknownDataset);
  EXPECT_EQ(error_of([&] { rig.data.stage_in("secret", "bob", {1, -1}); }), ErrorCode::InsufficientCapacity);
  EXPECT_TRUE(rig.state.audit().empty());
}

TEST(StageOut, ScrubsSourceAfterCopy) {
  StorageRig rig(reference_cluster(1));
  rig.state.add_dataset(DataSet{"out", 100 * GB, "alice", "", false});
  const ReplicaId src = rig.node_replica("out", 0);
  SimTime done{};
  rig.engine.timer(kSimEpoch, [&] { rig.data.stage_out(src, {}, [&](auto) { done = rig.engine.now(); }); });
  rig.engine.run();
  EXPECT_EQ(done, at_s(8));
  EXPECT_FALSE(rig.state.has_replica(src));
  EXPECT_EQ(rig.state.external_used(), 100 * GB);
  const auto scrubs = of_kind(rig.engine.trace(), EventKind::scrub);
  ASSERT_EQ(scrubs.size(), 1u);
  EXPECT_EQ(scrubs[0]->fields.at("reason"), "stage_out");
}

TEST(StageOut, TwoFromOneNodeShareItsLink) {
  StorageRig rig(reference_cluster(1));
  rig.state.add_dataset(DataSet{"a", 100 * GB, "alice", "", false});
  rig.state.add_dataset(DataSet{"b", 100 * GB, "alice", "", false});
  rig.node_replica("a", 0);
  rig.node_replica("b", 0);
  std::vector<SimTime> done;
  rig.engine.timer(kSimEpoch, [&] {
    rig.data.stage_out("a", {}, [&](auto) { done.push_back(rig.engine.now()); });
    rig.data.stage_out("b", {}, [&](auto) { done.push_back(rig.engine.now()); });
  });
  rig.engine.run();
  EXPECT_EQ(done, (std::vector<SimTime>{at_s(16), at_s(16)}));
}

TEST(StageOut, RetainedSourceSurvives) {
  StorageRig rig(reference_cluster(1));
  rig.state.add_dataset(DataSet{"out", 100 * GB, "alice", "W", false});
  const ReplicaId src = rig.node_replica("out", 0);
  rig.engine.timer(kSimEpoch, [&] {
    rig.data.retain(src, at_s(3600));
    rig.data.stage_out(src);
  });
  rig.engine.run(at_s(10));
  EXPECT_TRUE(rig.state.has_replica(src));
  rig.engine.run();
  EXPECT_FALSE(rig.state.has_replica(src));
  const auto exp = of_kind(rig.engine.trace(), EventKind::expiry);
  ASSERT_EQ(exp.size(), 1u);
  EXPECT_EQ(exp[0]->time, at_s(3600));
}

TEST(StageOut, NeedsResidentNodeCopy) {
  StorageRig rig(reference_cluster(1));
  rig.external_dataset("x", GB);
  EXPECT_EQ(error_of([&] { rig.data.stage_out("x"); }), ErrorCode::UnknownDataset);
}

TEST(Move, BetweenNodesAtLinkRate) {
  StorageRig rig(reference_cluster(2));
  rig.state.add_dataset(DataSet{"m", 50 * GB, "alice", "", false});
  const ReplicaId src = rig.node_replica("m", 0);
  ReplicaId dst = 0;
  rig.engine.timer(kSimEpoch, [&] { dst = rig.data.move_intra_cluster("m", 0, 1); });
  rig.engine.run();
  EXPECT_EQ(rig.engine.now(), at_s(4));
  EXPECT_FALSE(rig.state.has_replica(src));
  EXPECT_EQ(rig.state.replica(dst).node, 1);
  EXPECT_EQ(rig.state.node(0).scrubbed, 50 * GB);
}

TEST(Move, SameNodeIsImmediate) {
  StorageRig rig(reference_cluster(2));
  rig.state.add_dataset(DataSet{"m", 50 * GB, "alice", "", false});
  const ReplicaId src = rig.node_replica("m", 0);
  ReplicaId got = 0;
  rig.engine.timer(at_s(1), [&] { got = rig.data.move_intra_cluster("m", 0, 0); });
  rig.engine.run();
  EXPECT_EQ(got, src);
  EXPECT_EQ(rig.engine.now(), at_s(1));
}

TEST(Move, DestinationWithoutBapm) {
  ClusterSpec c = reference_cluster(2);
  c.nodes[1] = plain_node(1);
  StorageRig rig(c);
  rig.state.add_dataset(DataSet{"m", 50 * GB, "alice", "", false});
  rig.node_replica("m", 0);
  EXPECT_EQ(error_of([&] { rig.data.move_intra_cluster("m", 0, 1); }), ErrorCode::InsufficientCapacity);
  EXPECT_EQ(error_of([&] { rig.data.move_intra_cluster("m", 1, 0); }), ErrorCode::UnknownDataset);
}

TEST(ResolveAccess, LocalRemoteExternal) {
  StorageRig rig(reference_cluster(4));
  rig.external_dataset("d", GB);
  EXPECT_EQ(to_string(rig.data.resolve_access("alice", "d", 0)), "external");
  rig.node_replica("d", 3);
  rig.node_replica("d", 2);
  EXPECT_EQ(to_string(rig.data.resolve_access("alice", "d", 0)), "remote-bapm(2)");
  EXPECT_EQ(to_string(rig.data.resolve_access("alice", "d", 2)), "local");
  EXPECT_EQ(error_of([&] { rig.data.resolve_access("bob", "d", 0); }), ErrorCode::AccessDenied);
  rig.state.grant("alice", "bob");
  EXPECT_EQ(to_string(rig.data.resolve_access("bob", "d", 3)), "local");
}

TEST(ResolveAccess, FewestReadersWins) {
  StorageRig rig(reference_cluster(3));
  rig.state.add_dataset(DataSet{"d", GB, "alice", "", false});
  const ReplicaId a = rig.node_replica("d", 1);
  rig.node_replica("d", 2);
  rig.state.replica(a).readers = 2;
  EXPECT_EQ(rig.data.resolve_access("alice", "d", 0).node, 2);
}

TEST(Retention, BusyReplicaExpiresOnRelease) {
  StorageRig rig(reference_cluster(1));
  rig.state.add_dataset(DataSet{"r", GB, "alice", "W", false});
  const ReplicaId id = rig.node_replica("r", 0);
  rig.engine.timer(kSimEpoch, [&] {
    rig.data.retain(id, at_s(10));
    rig.state.replica(id).readers = 1;
  });
  rig.engine.timer(at_s(20), [&] {
    EXPECT_TRUE(rig.state.has_replica(id));
    rig.state.replica(id).readers = 0;
    rig.data.release(id);
  });
  rig.engine.run();
  EXPECT_FALSE(rig.state.has_replica(id));
  const auto exp = of_kind(rig.engine.trace(), EventKind::expiry);
  ASSERT_EQ(exp.size(), 1u);
  EXPECT_EQ(exp[0]->time, at_s(20));
}

TEST(Scrub, NodeScrubFreesEverything) {
  StorageRig rig(reference_cluster(1));
  rig.state.add_dataset(DataSet{"a", 3 * GB, "alice", "", false});
  rig.state.add_dataset(DataSet{"b", 4 * GB, "alice", "", false});
  rig.node_replica("a", 0);
  rig.node_replica("b", 0);
  EXPECT_EQ(rig.data.scrub_node(0, "cleanup"), 7 * GB);
  EXPECT_EQ(rig.state.node(0).free_bapm(), 3 * TB);
  EXPECT_EQ(of_kind(rig.engine.trace(), EventKind::scrub).size(), 2u);
}
