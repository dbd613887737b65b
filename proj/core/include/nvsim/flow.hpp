#pragma once

// Fluid model of concurrent transfers sharing bandwidth bottlenecks.
//
// Progress is tracked in fixed point: one byte is kUnitsPerByte work units
// and the model's own clock ticks in picoseconds, so every rate is an
// integer number of units per tick and every advance is an exact integer
// product. Completions are resolved at the tick they occur, which keeps the
// piecewise-linear trajectory faithful to well below a nanosecond before
// event times are rounded up to the engine's nanosecond clock.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nvsim/units.hpp"

namespace nvsim::flow {

using Wide = __int128;
using FineTime = Wide;  // picoseconds
using Rate = Wide;      // work units per picosecond

inline constexpr std::int64_t kTicksPerNs = 1000;
inline constexpr Wide kUnitsPerByte = Wide{1'000'000'000'000'000'000LL} * 1000;  // 1e21
/// bytes/s -> units/ps is a multiplication by kUnitsPerByte / 1e12.
inline constexpr Wide kRatePerBytePerSecond = 1'000'000'000;
/// Largest transfer the fixed-point representation admits (100 PB).
inline constexpr Bytes kMaxTransferBytes = 100'000'000'000'000'000ULL;

constexpr FineTime fine_from_ns(std::int64_t ns) { return Wide{ns} * kTicksPerNs; }
constexpr Rate rate_from_bandwidth(BytesPerSecond bw) { return Wide{static_cast<std::int64_t>(bw)} * kRatePerBytePerSecond; }
/// Rounds a model time up to the first nanosecond at or after it.
constexpr std::int64_t ceil_ns(FineTime t) {
  const Wide q = t / kTicksPerNs;
  return static_cast<std::int64_t>(q * kTicksPerNs == t ? q : (t > 0 ? q + 1 : q));
}
double bandwidth_from_rate(Rate r);

using ResourceId = std::size_t;
using FlowId = std::uint64_t;

/// Input to the progressive-filling solver: the resources a flow crosses and
/// an optional private rate ceiling.
struct FlowDemand {
  std::span<const ResourceId> resources;
  std::optional<Rate> cap;
};

/// Max-min fair rates by water-filling. Every round raises all unfrozen flows
/// to the smallest per-resource fair share (integer division), then freezes
/// the flows that cross a saturated resource or hit their own cap. Each flow
/// must cross at least one resource or carry a cap.
std::vector<Rate> max_min_rates(std::span<const Rate> capacities, std::span<const FlowDemand> flows);

struct Completion {
  FlowId id;
  FineTime at;
};

class FlowNetwork {
 public:
  ResourceId add_resource(std::string name, BytesPerSecond capacity);

  std::size_t resource_count() const { return resources_.size(); }
  /// Same resources, no flows, clock at zero.
  FlowNetwork empty_copy() const;
  const std::string& resource_name(ResourceId r) const { return resources_.at(r).name; }
  Rate capacity(ResourceId r) const { return resources_.at(r).capacity; }

  /// Starts a flow at model time `now` (>= current model time). Rates of all
  /// flows are recomputed.
  FlowId add(FineTime now, std::vector<ResourceId> path, Bytes bytes, std::optional<BytesPerSecond> cap = {});

  /// Drops an active flow without completing it. Returns the bytes it had
  /// delivered (rounded down).
  Bytes cancel(FineTime now, FlowId id);

  /// Moves the model clock to `t`, resolving every completion on the way in
  /// time order; rates are recomputed after each completion instant.
  std::vector<Completion> advance_to(FineTime t);

  std::optional<FineTime> next_completion() const;
  FineTime now() const { return now_; }

  bool active(FlowId id) const { return flows_.contains(id); }
  std::size_t active_count() const { return flows_.size(); }
  Rate rate(FlowId id) const { return flows_.at(id).rate; }
  const std::vector<ResourceId>& path(FlowId id) const { return flows_.at(id).path; }
  /// Remaining work in units.
  Wide remaining(FlowId id) const { return flows_.at(id).remaining; }
  Rate usage(ResourceId r) const;
  /// usage() of every resource, indexed by id.
  std::vector<Rate> usages() const;
  std::size_t flows_on(ResourceId r) const;
  std::vector<FlowId> active_ids() const;

  /// Audit record for a finished flow: delivered work is exactly the size,
  /// and the unused tail of the final tick is less than one tick of rate.
  struct Settlement {
    Bytes bytes = 0;
    Wide delivered = 0;
    Wide final_tick_slack = 0;
    Rate final_rate = 0;
  };
  const std::map<FlowId, Settlement>& settlements() const { return settled_; }

 private:
  struct Resource {
    std::string name;
    Rate capacity;
  };
  struct Flow {
    std::vector<ResourceId> path;
    Bytes bytes = 0;
    Wide remaining = 0;
    Wide delivered = 0;
    Rate rate = 0;
    std::optional<Rate> cap;
  };

  void integrate(FineTime t);
  void recompute();

  std::vector<Resource> resources_;
  std::map<FlowId, Flow> flows_;
  std::map<FlowId, Settlement> settled_;
  FineTime now_ = 0;
  FlowId next_id_ = 1;
};

}  // namespace nvsim::flow
