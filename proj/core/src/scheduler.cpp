#include "nvsim/scheduler.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "nvsim/error.hpp"

namespace nvsim {

std::string_view to_string(Queueing q) { return q == Queueing::fcfs ? "fcfs" : "fcfs-backfill"; }

std::string_view to_string(Scorer s) {
  switch (s) {
    case Scorer::none: return "none";
    case Scorer::data_aware: return "data-aware";
    case Scorer::energy_aware: return "energy-aware";
  }
  return "?";
}

std::optional<Queueing> parse_queueing(std::string_view s) {
  if (s == "fcfs") return Queueing::fcfs;
  if (s == "fcfs-backfill" || s == "backfill") return Queueing::fcfs_backfill;
  return std::nullopt;
}

std::optional<Scorer> parse_scorer(std::string_view s) {
  if (s == "none") return Scorer::none;
  if (s == "data-aware") return Scorer::data_aware;
  if (s == "energy-aware") return Scorer::energy_aware;
  return std::nullopt;
}

void validate_policy(const Policy& p) {
  const auto check = [](double v, std::string_view name) {
    if (!std::isfinite(v) || v < 0) {
      throw SimError(ErrorCode::InvalidArgument, fmt::format("scorer weight {} must be finite and non-negative", name));
    }
  };
  check(p.weights.w_data, "w_data");
  check(p.weights.e_byte, "e_byte");
  check(p.weights.e_switch, "e_switch");
}

std::vector<int> score_nodes(std::vector<NodeCandidate> candidates, Scorer scorer, const ScorerWeights& w) {
  const auto score = [&](const NodeCandidate& c) -> long double {
    switch (scorer) {
      case Scorer::none: return 0;
      case Scorer::data_aware: return static_cast<long double>(w.w_data) * static_cast<long double>(c.resident_input_bytes);
      case Scorer::energy_aware:
        return -(static_cast<long double>(c.moved_bytes) * static_cast<long double>(w.e_byte) +
                 (c.needs_switch ? static_cast<long double>(w.e_switch) : 0.0L));
    }
    return 0;
  };
  std::vector<std::pair<long double, int>> ranked;
  ranked.reserve(candidates.size());
  for (const NodeCandidate& c : candidates) ranked.emplace_back(score(c), c.node);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<int> out;
  out.reserve(ranked.size());
  for (const auto& [s, n] : ranked) out.push_back(n);
  return out;
}

std::vector<NodeCandidate> describe_candidates(const ClusterState& state, const std::vector<int>& nodes,
                                               const std::vector<std::string>& inputs, MemoryMode required_mode) {
  Bytes total = 0;
  std::vector<Bytes> resident(state.node_count(), 0);
  std::vector<char> seen(state.node_count(), 0);
  for (const std::string& d : inputs) {
    if (const DataSet* ds = state.find_dataset(d)) total += ds->bytes;
    std::fill(seen.begin(), seen.end(), 0);
    for (ReplicaId id : state.replicas_of(d)) {
      const Replica& r = state.replica(id);
      if (r.node < 0 || r.state != ReplicaState::resident) continue;
      const auto n = static_cast<std::size_t>(r.node);
      if (seen[n]) continue;
      seen[n] = 1;
      resident[n] += r.bytes;
    }
  }
  std::vector<NodeCandidate> out;
  out.reserve(nodes.size());
  for (int node : nodes) {
    NodeCandidate c;
    c.node = node;
    c.needs_switch = state.node(node).mode != required_mode;
    c.resident_input_bytes = c.needs_switch ? 0 : resident[static_cast<std::size_t>(node)];
    c.moved_bytes = total - c.resident_input_bytes;
    out.push_back(c);
  }
  return out;
}

NodeCandidate describe_candidate(const ClusterState& state, int node, const std::vector<std::string>& inputs,
                                 MemoryMode required_mode) {
  return describe_candidates(state, {node}, inputs, required_mode).front();
}

namespace {

struct Interval {
  SimTime begin;
  SimTime end;
};

// Per-node busy intervals, sorted and disjoint.
class Profile {
 public:
  void add(int node, SimTime begin, SimTime end) {
    if (static_cast<std::size_t>(node) >= busy_.size()) busy_.resize(static_cast<std::size_t>(node) + 1);
    auto& v = busy_[static_cast<std::size_t>(node)];
    auto at = std::upper_bound(v.begin(), v.end(), begin, [](SimTime t, const Interval& iv) { return t < iv.begin; });
    v.insert(at, Interval{begin, end});
  }

  bool free(int node, SimTime begin, SimTime end) const {
    const auto& v = intervals(node);
    auto it = std::upper_bound(v.begin(), v.end(), begin, [](SimTime t, const Interval& iv) { return t < iv.end; });
    return it == v.end() || end <= it->begin;
  }

  // Earliest t >= from at which k nodes of the pool are free over [t, t + d).
  std::optional<SimTime> earliest(const std::vector<int>& pool, std::uint32_t k, SimTime from, SimDuration d) const {
    std::vector<std::pair<SimTime, int>> edges;
    for (int n : pool) {
      SimTime cur = from;
      for (const Interval& iv : intervals(n)) {
        if (iv.end <= cur) continue;
        if (cur + d <= iv.begin) {
          edges.emplace_back(cur, 1);
          edges.emplace_back(iv.begin - d + SimDuration{1}, -1);
        }
        cur = std::max(cur, iv.end);
      }
      edges.emplace_back(cur, 1);
    }
    std::sort(edges.begin(), edges.end());
    std::int64_t count = 0;
    for (std::size_t i = 0; i < edges.size();) {
      const SimTime t = edges[i].first;
      for (; i < edges.size() && edges[i].first == t; ++i) count += edges[i].second;
      if (count >= static_cast<std::int64_t>(k)) return t;
    }
    return std::nullopt;
  }

 private:
  const std::vector<Interval>& intervals(int node) const {
    static const std::vector<Interval> none;
    return static_cast<std::size_t>(node) < busy_.size() ? busy_[static_cast<std::size_t>(node)] : none;
  }

  std::vector<std::vector<Interval>> busy_;
};

std::vector<int> pick(const Profile& p, const std::vector<int>& pool, std::uint32_t k, SimTime t, SimTime end) {
  std::vector<int> chosen;
  for (int n : pool) {
    if (chosen.size() == k) break;
    if (p.free(n, t, end)) chosen.push_back(n);
  }
  if (chosen.size() < k) chosen.clear();
  return chosen;
}

}  // namespace

std::vector<Reservation> plan_schedule(const PlanInput& in) {
  Profile profile;
  for (const BusyNode& b : in.busy) profile.add(b.node, in.now, std::max(b.until, in.now + SimDuration{1}));

  std::vector<Reservation> out;
  const std::size_t depth = in.queueing == Queueing::fcfs ? in.queue.size() : std::min(in.queue.size(), in.max_depth);
  for (std::size_t i = 0; i < depth; ++i) {
    const PlanJob& job = in.queue[i];
    if (job.nodes == 0) continue;
    const SimDuration d = std::max(job.duration, SimDuration{1});

    std::optional<Reservation> found;
    if (auto now_nodes = pick(profile, job.ready_now, job.nodes, in.now, in.now + d); !now_nodes.empty()) {
      found = Reservation{job.job, in.now, std::move(now_nodes)};
    } else if (in.queueing == Queueing::fcfs) {
      break;
    } else {
      if (auto t = profile.earliest(job.eligible, job.nodes, in.now + SimDuration{1}, d)) {
        found = Reservation{job.job, *t, pick(profile, job.eligible, job.nodes, *t, *t + d)};
      }
    }
    if (!found) continue;
    for (int n : found->nodes) profile.add(n, found->start, found->start + d);
    out.push_back(std::move(*found));
  }
  return out;
}

}  // namespace nvsim
