#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nvsim/memory_mode.hpp"
#include "nvsim/state.hpp"
#include "nvsim/units.hpp"

namespace nvsim {

enum class Queueing { fcfs, fcfs_backfill };
enum class Scorer { none, data_aware, energy_aware };

std::string_view to_string(Queueing q);
std::string_view to_string(Scorer s);
std::optional<Queueing> parse_queueing(std::string_view s);
std::optional<Scorer> parse_scorer(std::string_view s);

struct ScorerWeights {
  double w_data = 1.0;     // per resident input byte
  double e_byte = 1e-9;    // J per byte moved
  double e_switch = 1.5e5; // J per mode switch
};

struct Policy {
  Queueing queueing = Queueing::fcfs_backfill;
  Scorer scorer = Scorer::none;
  ScorerWeights weights;
  std::size_t max_backfill_depth = 256;
};

/// Throws InvalidArgument for negative or non-finite weights.
void validate_policy(const Policy& p);

struct NodeCandidate {
  int node = -1;
  Bytes resident_input_bytes = 0;
  Bytes moved_bytes = 0;  // input bytes that would have to cross the network
  bool needs_switch = false;
};

/// Orders candidates by descending score, ties by ascending node id.
///   none:         every score equal (pure id order)
///   data-aware:   w_data * resident input bytes
///   energy-aware: -(moved bytes * e_byte + needs_switch * e_switch)
std::vector<int> score_nodes(std::vector<NodeCandidate> candidates, Scorer scorer, const ScorerWeights& w);

/// Candidate description for one node given a job's inputs and mode.
NodeCandidate describe_candidate(const ClusterState& state, int node, const std::vector<std::string>& inputs,
                                 MemoryMode required_mode);
/// Same for several nodes at once.
std::vector<NodeCandidate> describe_candidates(const ClusterState& state, const std::vector<int>& nodes,
                                               const std::vector<std::string>& inputs, MemoryMode required_mode);

/// One queued job as seen by the planner.
struct PlanJob {
  int job = -1;
  std::uint32_t nodes = 1;
  SimDuration duration{};     // planned occupancy, at least 1 ns is used
  std::vector<int> ready_now; // nodes the job could take right now, ranked
  std::vector<int> eligible;  // nodes the job could ever run on, ranked
};

/// A node that is unavailable over [now, until).
struct BusyNode {
  int node = -1;
  SimTime until{};
};

struct PlanInput {
  SimTime now{};
  std::vector<BusyNode> busy;
  std::vector<PlanJob> queue;  // queue order
  Queueing queueing = Queueing::fcfs_backfill;
  std::size_t max_depth = 256;
};

struct Reservation {
  int job = -1;
  SimTime start{};
  std::vector<int> nodes;

  friend bool operator==(const Reservation&, const Reservation&) = default;
};

/// FCFS: starts jobs in queue order until the first one that cannot start
/// now. Backfill (conservative): every job up to max_depth, in queue order,
/// receives the earliest reservation that fits around the busy nodes and all
/// earlier reservations, so no later job can push an earlier one back; jobs
/// whose reservation starts now are the ones to launch. At `now` only
/// ready_now nodes count, at later instants every eligible node does.
std::vector<Reservation> plan_schedule(const PlanInput& in);

}  // namespace nvsim
