#include "nvsim/flow.hpp"

#include <algorithm>
#include <limits>

#include <fmt/format.h>

#include "nvsim/error.hpp"

namespace nvsim::flow {

double bandwidth_from_rate(Rate r) {
  return static_cast<double>(static_cast<long double>(r) / static_cast<long double>(kRatePerBytePerSecond));
}

std::vector<Rate> max_min_rates(std::span<const Rate> capacities, std::span<const FlowDemand> flows) {
  const std::size_t n = flows.size();
  std::vector<Rate> rate(n, 0);
  std::vector<bool> frozen(n, false);
  std::vector<Rate> residual(capacities.begin(), capacities.end());
  std::vector<std::size_t> unfrozen_on(capacities.size(), 0);

  for (std::size_t f = 0; f < n; ++f) {
    if (flows[f].resources.empty() && !flows[f].cap) {
      throw SimError(ErrorCode::InvalidArgument, "flow crosses no resource and has no cap");
    }
    for (ResourceId r : flows[f].resources) ++unfrozen_on.at(r);
  }
  std::vector<ResourceId> used;
  for (ResourceId r = 0; r < unfrozen_on.size(); ++r) {
    if (unfrozen_on[r] > 0) used.push_back(r);
  }
  std::vector<bool> tight(residual.size(), false);

  std::size_t remaining = n;
  while (remaining > 0) {
    Rate level = std::numeric_limits<Rate>::max();
    for (ResourceId r : used) {
      if (unfrozen_on[r] > 0) level = std::min(level, residual[r] / static_cast<Rate>(unfrozen_on[r]));
    }
    for (std::size_t f = 0; f < n; ++f) {
      if (!frozen[f] && flows[f].cap) level = std::min(level, *flows[f].cap);
    }

    for (ResourceId r : used) {
      tight[r] = unfrozen_on[r] > 0 && residual[r] / static_cast<Rate>(unfrozen_on[r]) == level;
    }

    std::vector<std::size_t> freeze;
    for (std::size_t f = 0; f < n; ++f) {
      if (frozen[f]) continue;
      bool hit = flows[f].cap && *flows[f].cap == level;
      for (ResourceId r : flows[f].resources) hit = hit || tight[r];
      if (hit) freeze.push_back(f);
    }
    for (std::size_t f : freeze) {
      frozen[f] = true;
      rate[f] = level;
      --remaining;
      for (ResourceId r : flows[f].resources) {
        residual[r] -= level;
        --unfrozen_on[r];
      }
    }
  }
  return rate;
}

ResourceId FlowNetwork::add_resource(std::string name, BytesPerSecond capacity) {
  if (capacity == 0) {
    throw SimError(ErrorCode::NonPositiveParameter, fmt::format("resource '{}' needs a positive capacity", name));
  }
  resources_.push_back(Resource{std::move(name), rate_from_bandwidth(capacity)});
  return resources_.size() - 1;
}

FlowNetwork FlowNetwork::empty_copy() const {
  FlowNetwork copy;
  copy.resources_ = resources_;
  return copy;
}

FlowId FlowNetwork::add(FineTime now, std::vector<ResourceId> path, Bytes bytes, std::optional<BytesPerSecond> cap) {
  if (now != now_) throw SimError(ErrorCode::EventInPast, "flow added at a time other than the model clock");
  if (bytes > kMaxTransferBytes) {
    throw SimError(ErrorCode::InvalidArgument, fmt::format("transfer of {} bytes exceeds the model limit", bytes));
  }
  for (ResourceId r : path) {
    if (r >= resources_.size()) throw SimError(ErrorCode::InvalidArgument, "unknown resource in flow path");
  }
  std::sort(path.begin(), path.end());
  path.erase(std::unique(path.begin(), path.end()), path.end());
  if (path.empty() && !cap) throw SimError(ErrorCode::InvalidArgument, "flow needs a resource or a cap");

  const FlowId id = next_id_++;
  Flow f;
  f.path = std::move(path);
  f.bytes = bytes;
  f.remaining = Wide{static_cast<std::int64_t>(bytes)} * kUnitsPerByte;
  if (cap) {
    if (*cap == 0) throw SimError(ErrorCode::NonPositiveParameter, "flow cap must be positive");
    f.cap = rate_from_bandwidth(*cap);
  }
  flows_.emplace(id, std::move(f));
  recompute();
  return id;
}

Bytes FlowNetwork::cancel(FineTime now, FlowId id) {
  if (now != now_) throw SimError(ErrorCode::EventInPast, "flow cancelled at a time other than the model clock");
  auto it = flows_.find(id);
  if (it == flows_.end()) return 0;
  const Bytes delivered = static_cast<Bytes>(it->second.delivered / kUnitsPerByte);
  flows_.erase(it);
  recompute();
  return delivered;
}

std::optional<FineTime> FlowNetwork::next_completion() const {
  std::optional<FineTime> best;
  for (const auto& [id, f] : flows_) {
    FineTime t;
    if (f.remaining == 0) {
      t = now_;
    } else if (f.rate > 0) {
      t = now_ + (f.remaining + f.rate - 1) / f.rate;
    } else {
      continue;
    }
    if (!best || t < *best) best = t;
  }
  return best;
}

void FlowNetwork::integrate(FineTime t) {
  const Wide dt = t - now_;
  if (dt < 0) throw SimError(ErrorCode::EventInPast, "flow model asked to run backwards");
  if (dt == 0) return;
  for (auto& [id, f] : flows_) {
    if (f.remaining == 0 || f.rate == 0) continue;
    // rate * dt <= remaining + rate here.
    const Wide progress = f.rate * dt;
    if (progress >= f.remaining) {
      settled_[id].final_tick_slack = progress - f.remaining;
      f.delivered += f.remaining;
      f.remaining = 0;
    } else {
      f.remaining -= progress;
      f.delivered += progress;
    }
  }
  now_ = t;
}

std::vector<Completion> FlowNetwork::advance_to(FineTime t) {
  if (t < now_) throw SimError(ErrorCode::EventInPast, "flow model asked to run backwards");
  std::vector<Completion> done;
  while (true) {
    const auto next = next_completion();
    if (!next || *next > t) break;
    integrate(*next);
    for (auto it = flows_.begin(); it != flows_.end();) {
      if (it->second.remaining == 0) {
        Settlement& s = settled_[it->first];
        s.bytes = it->second.bytes;
        s.delivered = it->second.delivered;
        s.final_rate = it->second.rate;
        done.push_back(Completion{it->first, now_});
        it = flows_.erase(it);
      } else {
        ++it;
      }
    }
    recompute();
  }
  integrate(t);
  return done;
}

void FlowNetwork::recompute() {
  if (flows_.empty()) return;
  std::vector<Rate> caps;
  caps.reserve(resources_.size());
  for (const Resource& r : resources_) caps.push_back(r.capacity);
  std::vector<FlowDemand> demands;
  demands.reserve(flows_.size());
  for (const auto& [id, f] : flows_) demands.push_back(FlowDemand{f.path, f.cap});
  const std::vector<Rate> rates = max_min_rates(caps, demands);
  std::size_t i = 0;
  for (auto& [id, f] : flows_) f.rate = rates[i++];
}

Rate FlowNetwork::usage(ResourceId r) const {
  Rate total = 0;
  for (const auto& [id, f] : flows_) {
    if (std::binary_search(f.path.begin(), f.path.end(), r)) total += f.rate;
  }
  return total;
}

std::vector<Rate> FlowNetwork::usages() const {
  std::vector<Rate> out(resources_.size(), 0);
  for (const auto& [id, f] : flows_) {
    for (ResourceId r : f.path) out[r] += f.rate;
  }
  return out;
}

std::size_t FlowNetwork::flows_on(ResourceId r) const {
  std::size_t n = 0;
  for (const auto& [id, f] : flows_) {
    if (std::binary_search(f.path.begin(), f.path.end(), r)) ++n;
  }
  return n;
}

std::vector<FlowId> FlowNetwork::active_ids() const {
  std::vector<FlowId> ids;
  ids.reserve(flows_.size());
  for (const auto& [id, f] : flows_) ids.push_back(id);
  return ids;
}

}  // namespace nvsim::flow
