#include "nvsim/data_scheduler.hpp"

#include <fmt/format.h>

#include "nvsim/error.hpp"

namespace nvsim {

std::string to_string(const AccessPath& p) {
  switch (p.kind) {
    case AccessPath::Kind::local: return "local";
    case AccessPath::Kind::remote_bapm: return fmt::format("remote-bapm({})", p.node);
    case AccessPath::Kind::external: return "external";
  }
  return "?";
}

namespace {

Fields with(Fields tags, std::initializer_list<std::pair<std::string, std::string>> extra) {
  for (const auto& [k, v] : extra) tags.add(k, v);
  return tags;
}

}  // namespace

DataScheduler::DataScheduler(Engine& engine, TransferService& transfers, ClusterState& state,
                             const ResourceMap& resources)
    : engine_(engine), transfers_(transfers), state_(state), res_(resources) {}

std::string DataScheduler::where(const Replica& r) {
  if (r.tier == ReplicaTier::external_fs) return "external";
  return fmt::format("node:{}", r.node);
}

std::optional<ReplicaId> DataScheduler::best_bapm_source(std::string_view dataset, int exclude_node) const {
  std::optional<ReplicaId> best;
  for (ReplicaId id : state_.replicas_of(dataset)) {
    const Replica& r = state_.replica(id);
    if (r.tier == ReplicaTier::external_fs || r.state != ReplicaState::resident || r.node == exclude_node) continue;
    if (!best) {
      best = id;
      continue;
    }
    const Replica& b = state_.replica(*best);
    if (r.readers < b.readers || (r.readers == b.readers && r.node < b.node)) best = id;
  }
  return best;
}

std::optional<ReplicaId> DataScheduler::external_replica(std::string_view dataset) const {
  for (ReplicaId id : state_.replicas_of(dataset)) {
    const Replica& r = state_.replica(id);
    if (r.tier == ReplicaTier::external_fs && r.state == ReplicaState::resident) return id;
  }
  return std::nullopt;
}

TransferService::TransferId DataScheduler::transfer(const ResourceMap::Path& path, Bytes bytes,
                                                    std::function<void()> on_done) {
  ++in_flight_;
  return transfers_.start(
      path, bytes,
      [this, on_done = std::move(on_done)](TransferService::TransferId) {
        --in_flight_;
        on_done();
      },
      fs_overhead_cap(state_, res_, path));
}

ReplicaId DataScheduler::stage_in(std::string_view dataset, std::string_view principal, Target target, Fields tags,
                                  Done done) {
  const DataSet& ds = state_.dataset(dataset);
  state_.check_access(principal, ds);
  const int node = target.node;
  if (!state_.node(node).spec.has_bapm()) {
    throw SimError(ErrorCode::InsufficientCapacity, fmt::format("node {} has no B-APM to stage into", node));
  }
  if (auto existing = state_.resident_on(dataset, node)) {
    engine_.timer(engine_.now(), [done, id = *existing] {
      if (done) done(id);
    });
    return *existing;
  }

  const auto bapm_src = best_bapm_source(dataset, node);
  const auto ext_src = bapm_src ? std::nullopt : external_replica(dataset);
  if (!bapm_src && !ext_src) {
    throw SimError(ErrorCode::UnknownDataset, fmt::format("dataset '{}' has no resident copy to stage from", dataset));
  }

  Replica r;
  r.dataset = ds.id;
  r.tier = target.fs >= 0 ? ReplicaTier::distributed_fs : ReplicaTier::node_bapm;
  r.node = node;
  r.fs = target.fs;
  r.state = ReplicaState::staging;
  r.bytes = ds.bytes;
  r.scratch = ds.scratch;
  const ReplicaId id = state_.add_replica(std::move(r));

  std::string direction = "in";
  std::string src = "external";
  ResourceMap::Path path;
  if (bapm_src) {
    Replica& s = state_.replica(*bapm_src);
    ++s.readers;
    direction = "move";
    src = where(s);
    path = res_.bapm_to_bapm(s.node, node);
  } else {
    path = res_.external_to_bapm(node);
  }

  Fields info = with(std::move(tags), {{"dataset", ds.id},
                                       {"direction", direction},
                                       {"src", src},
                                       {"dst", fmt::format("node:{}", node)},
                                       {"bytes", std::to_string(ds.bytes)}});
  if (target.fs >= 0) info.add("fs", target.fs);
  engine_.emit(EventKind::stage_start, info);

  transfer(path, ds.bytes, [this, id, source = bapm_src, info, done] {
    if (Replica* r = state_.find_replica(id)) r->state = ReplicaState::resident;
    if (source) {
      if (Replica* s = state_.find_replica(*source)) {
        --s->readers;
        release(*source);
      }
    }
    engine_.emit(EventKind::stage_end, info);
    if (done) done(id);
  });
  return id;
}

ReplicaId DataScheduler::stage_out(ReplicaId source, Fields tags, Done done) {
  Replica& s = state_.replica(source);
  if (s.tier == ReplicaTier::external_fs || s.state != ReplicaState::resident) {
    throw SimError(ErrorCode::InvalidArgument, fmt::format("replica {} is not a resident node copy", source));
  }
  Replica r;
  r.dataset = s.dataset;
  r.tier = ReplicaTier::external_fs;
  r.state = ReplicaState::staging;
  r.bytes = s.bytes;
  const ReplicaId id = state_.add_replica(std::move(r));

  Replica& src = state_.replica(source);
  ++src.pending_stage_outs;
  Fields info = with(std::move(tags), {{"dataset", src.dataset},
                                       {"direction", "out"},
                                       {"src", where(src)},
                                       {"dst", "external"},
                                       {"bytes", std::to_string(src.bytes)}});
  engine_.emit(EventKind::stage_start, info);

  transfer(res_.bapm_to_external(src.node), src.bytes, [this, id, source, info, done] {
    if (Replica* r = state_.find_replica(id)) r->state = ReplicaState::resident;
    engine_.emit(EventKind::stage_end, info);
    if (Replica* s = state_.find_replica(source)) {
      --s->pending_stage_outs;
      if (!s->expiry && !s->in_use()) {
        scrub(source, "stage_out");
      } else {
        release(source);
      }
    }
    if (done) done(id);
  });
  return id;
}

ReplicaId DataScheduler::stage_out(std::string_view dataset, Fields tags, Done done) {
  state_.dataset(dataset);
  const auto src = best_bapm_source(dataset, -1);
  if (!src) throw SimError(ErrorCode::UnknownDataset, fmt::format("dataset '{}' has no node copy to stage out", dataset));
  return stage_out(*src, std::move(tags), std::move(done));
}

ReplicaId DataScheduler::move_intra_cluster(std::string_view dataset, int src, int dst, Fields tags, Done done) {
  const DataSet& ds = state_.dataset(dataset);
  const auto from = state_.resident_on(dataset, src);
  if (!from) throw SimError(ErrorCode::UnknownDataset, fmt::format("dataset '{}' is not resident on node {}", dataset, src));
  if (src == dst) {
    engine_.timer(engine_.now(), [done, id = *from] {
      if (done) done(id);
    });
    return *from;
  }
  if (!state_.node(dst).spec.has_bapm()) {
    throw SimError(ErrorCode::InsufficientCapacity, fmt::format("node {} has no B-APM", dst));
  }
  Replica r;
  r.dataset = ds.id;
  r.tier = ReplicaTier::node_bapm;
  r.node = dst;
  r.state = ReplicaState::staging;
  r.bytes = ds.bytes;
  r.scratch = ds.scratch;
  const ReplicaId id = state_.add_replica(std::move(r));
  ++state_.replica(*from).readers;

  Fields info = with(std::move(tags), {{"dataset", ds.id},
                                       {"direction", "move"},
                                       {"src", fmt::format("node:{}", src)},
                                       {"dst", fmt::format("node:{}", dst)},
                                       {"bytes", std::to_string(ds.bytes)}});
  engine_.emit(EventKind::stage_start, info);
  transfer(res_.bapm_to_bapm(src, dst), ds.bytes, [this, id, source = *from, info, done] {
    if (Replica* r = state_.find_replica(id)) r->state = ReplicaState::resident;
    engine_.emit(EventKind::stage_end, info);
    if (Replica* s = state_.find_replica(source)) {
      --s->readers;
      if (!s->expiry && !s->in_use()) {
        scrub(source, "move");
      } else {
        release(source);
      }
    }
    if (done) done(id);
  });
  return id;
}

AccessPath DataScheduler::resolve_access(std::string_view principal, std::string_view dataset, int node) const {
  state_.check_access(principal, state_.dataset(dataset));
  if (auto local = state_.resident_on(dataset, node)) {
    return AccessPath{AccessPath::Kind::local, node, *local};
  }
  if (auto remote = best_bapm_source(dataset, node)) {
    return AccessPath{AccessPath::Kind::remote_bapm, state_.replica(*remote).node, *remote};
  }
  if (auto ext = external_replica(dataset)) return AccessPath{AccessPath::Kind::external, -1, *ext};
  throw SimError(ErrorCode::UnknownDataset, fmt::format("dataset '{}' has no resident copy", dataset));
}

void DataScheduler::scrub(ReplicaId id, std::string_view reason, Fields tags) {
  const Replica r = state_.remove_replica(id);
  if (r.tier != ReplicaTier::external_fs) state_.node(r.node).scrubbed += r.bytes;
  engine_.emit(EventKind::scrub, with(std::move(tags), {{"dataset", r.dataset},
                                                        {"replica", std::to_string(r.id)},
                                                        {"at", where(r)},
                                                        {"tier", std::string(to_string(r.tier))},
                                                        {"bytes", std::to_string(r.bytes)},
                                                        {"reason", std::string(reason)}}));
}

Bytes DataScheduler::scrub_node(int node, std::string_view reason, Fields tags) {
  Bytes freed = 0;
  for (ReplicaId id : state_.replicas_on(node)) {
    freed += state_.replica(id).bytes;
    scrub(id, reason, tags);
  }
  return freed;
}

void DataScheduler::retain(ReplicaId id, SimTime expiry) {
  Replica& r = state_.replica(id);
  r.expiry = expiry;
  r.expired = false;
  engine_.timer(expiry, [this, id, expiry] { on_expiry(id, expiry); });
}

void DataScheduler::on_expiry(ReplicaId id, SimTime at) {
  Replica* r = state_.find_replica(id);
  if (!r || r->expiry != at) return;
  if (r->in_use()) {
    r->expired = true;
    return;
  }
  engine_.emit(EventKind::expiry, Fields{{"dataset", r->dataset}, {"replica", std::to_string(id)}, {"at", where(*r)}});
  scrub(id, "expiry");
}

void DataScheduler::release(ReplicaId id) {
  Replica* r = state_.find_replica(id);
  if (!r || !r->expired || r->in_use()) return;
  engine_.emit(EventKind::expiry, Fields{{"dataset", r->dataset}, {"replica", std::to_string(id)}, {"at", where(*r)}});
  scrub(id, "expiry");
}

}  // namespace nvsim
