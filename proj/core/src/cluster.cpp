#include "nvsim/cluster.hpp"

#include <algorithm>
#include <limits>
#include <set>

#include <fmt/format.h>

namespace nvsim {
namespace {

using u128 = unsigned __int128;

constexpr u128 kPeta = 1'000'000'000'000'000ULL;
constexpr u128 kTera = 1'000'000'000'000ULL;

std::string u128_to_string(u128 v) {
  if (v == 0) return "0";
  std::string s;
  while (v > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(s.begin(), s.end());
  return s;
}

double ratio(u128 num, u128 den) { return static_cast<double>(static_cast<long double>(num) / static_cast<long double>(den)); }

}  // namespace

Bytes NodeSpec::dram_bytes() const {
  return static_cast<Bytes>(sockets) * dram_dimms_per_socket * dram_dimm_bytes;
}

Bytes NodeSpec::bapm_bytes() const {
  return static_cast<Bytes>(sockets) * bapm_dimms_per_socket * bapm_dimm_bytes;
}

void ValidationReport::throw_if_failed() const {
  if (errors.empty()) return;
  const Diagnostic& d = errors.front();
  throw SimError(d.code, d.message);
}

ValidationReport validate_cluster(const ClusterSpec& spec) {
  ValidationReport report;
  auto error = [&](ErrorCode code, int node, std::string msg) {
    report.errors.push_back(Diagnostic{code, node, std::move(msg)});
  };

  if (spec.external_fs_bw == 0) error(ErrorCode::NonPositiveParameter, -1, "external_fs_bw must be > 0");
  if (spec.external_fs_capacity == 0) error(ErrorCode::NonPositiveParameter, -1, "external_fs_capacity must be > 0");
  if (spec.mode_switch_seconds <= SimDuration::zero()) {
    error(ErrorCode::NonPositiveParameter, -1, "mode_switch_seconds must be > 0");
  }
  if (!(spec.distributed_fs_fraction > 0.0 && spec.distributed_fs_fraction <= 1.0)) {
    error(ErrorCode::NonPositiveParameter, -1, "distributed_fs_fraction must be in (0, 1]");
  }
  if (!(spec.fs_overhead >= 1.0)) error(ErrorCode::NonPositiveParameter, -1, "fs_overhead must be >= 1");

  std::set<int> seen;
  for (const NodeSpec& n : spec.nodes) {
    const int id = n.node_id;
    if (!seen.insert(id).second) {
      error(ErrorCode::DuplicateNodeId, id, fmt::format("node_id {} appears more than once", id));
    }
    const std::uint64_t slots = static_cast<std::uint64_t>(n.channels_per_socket) * n.slots_per_channel;
    const std::uint64_t dimms = static_cast<std::uint64_t>(n.dram_dimms_per_socket) + n.bapm_dimms_per_socket;
    if (dimms > slots) {
      error(ErrorCode::SlotOverflow, id,
            fmt::format("node {}: {} DIMMs per socket exceed {} channels x {} slots", id, dimms,
                        n.channels_per_socket, n.slots_per_channel));
    }
    auto positive = [&](bool cond, std::string_view field) {
      if (!cond) error(ErrorCode::NonPositiveParameter, id, fmt::format("node {}: {} must be > 0", id, field));
    };
    positive(n.sockets > 0, "sockets");
    positive(n.channels_per_socket > 0, "channels_per_socket");
    positive(n.slots_per_channel > 0, "slots_per_channel");
    positive(n.dram_dimm_bytes > 0, "dram_dimm_bytes");
    positive(n.dram_bw > 0, "dram_bw");
    positive(n.flops > 0, "flops");
    positive(n.link_bw > 0, "link_bw");
    positive(n.dram_latency > SimDuration::zero(), "dram_latency");
    if (n.bapm_dimms_per_socket > 0) {
      positive(n.bapm_dimm_bytes > 0, "bapm_dimm_bytes");
      positive(n.bapm_bw > 0, "bapm_bw");
    }
    if (!(n.bapm_latency_ratio >= 1.0)) {
      error(ErrorCode::NonPositiveParameter, id, fmt::format("node {}: bapm_latency_ratio must be >= 1", id));
    }
    if (n.initial_mode == MemoryMode::DLM) {
      if (n.dram_dimms_per_socket == 0) {
        error(ErrorCode::DlmRequiresDram, id,
              fmt::format("node {}: DLM needs at least one DRAM DIMM per memory controller", id));
      }
      if (n.bapm_dimms_per_socket == 0) {
        error(ErrorCode::InvalidArgument, id, fmt::format("node {}: DLM needs B-APM DIMMs to cache", id));
      }
    }
    if (n.bapm_dimms_per_socket > 0 && n.dram_dimm_bytes > 0 && n.bapm_dimm_bytes > 0) {
      const double density = static_cast<double>(n.bapm_dimm_bytes) / static_cast<double>(n.dram_dimm_bytes);
      if (density < 2.0 || density > 5.0) {
        report.warnings.push_back(Diagnostic{
            ErrorCode::InvalidArgument, id,
            fmt::format("node {}: B-APM/DRAM DIMM density ratio {:.3g} outside the expected [2, 5]", id, density)});
      }
    }
  }
  // Ids must be exactly 0..n-1.
  int expected = 0;
  for (int id : seen) {
    if (id != expected) {
      error(ErrorCode::InvalidArgument, id, fmt::format("node ids must be dense from 0; found {} where {} expected",
                                                        id, expected));
      break;
    }
    ++expected;
  }
  return report;
}

double AggregateReport::compute_pflops() const { return ratio(total_flops, kPeta); }
double AggregateReport::bapm_capacity_pb() const { return ratio(total_bapm_bytes, kPeta); }
double AggregateReport::bapm_io_bw_tbs() const { return ratio(total_bapm_bw, kTera); }

std::string AggregateReport::compute_pflops_display() const { return truncate_for_display(total_flops, kPeta); }
std::string AggregateReport::bapm_capacity_pb_display() const { return truncate_for_display(total_bapm_bytes, kPeta); }
std::string AggregateReport::bapm_io_bw_tbs_display() const { return truncate_for_display(total_bapm_bw, kTera); }

AggregateReport aggregate_for(std::uint64_t node_count, Bytes bapm_per_node, FlopsPerSecond flops_per_node,
                              BytesPerSecond bapm_bw_per_node) {
  AggregateReport r;
  r.node_count = node_count;
  r.total_flops = static_cast<u128>(node_count) * flops_per_node;
  r.total_bapm_bytes = static_cast<u128>(node_count) * bapm_per_node;
  r.total_bapm_bw = static_cast<u128>(node_count) * bapm_bw_per_node;
  return r;
}

AggregateReport aggregate_metrics(const ClusterSpec& spec) {
  if (spec.nodes.empty()) return AggregateReport{};
  const NodeSpec& first = spec.nodes.front();
  for (const NodeSpec& n : spec.nodes) {
    if (n.bapm_bytes() != first.bapm_bytes() || n.flops != first.flops || n.bapm_bw != first.bapm_bw) {
      throw SimError(ErrorCode::HeterogeneousCluster,
                     fmt::format("node {} differs from node {}; the report needs identical nodes", n.node_id,
                                 first.node_id));
    }
  }
  return aggregate_for(spec.nodes.size(), first.bapm_bytes(), first.flops, first.bapm_bw);
}

std::string truncate_for_display(u128 numerator, u128 denominator) {
  if (denominator == 0) throw SimError(ErrorCode::InvalidArgument, "zero denominator");
  if (numerator == 0) return "0";
  // value >= 5: integer part only.
  if (numerator >= 5 * denominator) return u128_to_string(numerator / denominator);

  // Two significant digits: find k such that floor(v * 10^k) lies in [10, 99].
  unsigned k = 0;
  u128 scaled = numerator;
  while (scaled / denominator < 10) {
    if (scaled > std::numeric_limits<u128>::max() / 10) {
      throw SimError(ErrorCode::InvalidArgument, "value too small to display");
    }
    scaled *= 10;
    ++k;
  }
  // v < 5 forces k >= 1, and digits / 10^k is v truncated to two significant figures.
  std::string s = u128_to_string(scaled / denominator);
  if (k >= s.size()) {
    s = "0." + std::string(k - s.size(), '0') + s;
  } else {
    s.insert(s.size() - k, ".");
  }
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

std::uint64_t crossover_nodes(BytesPerSecond target_bw, BytesPerSecond per_node_bw) {
  if (target_bw == 0 || per_node_bw == 0) {
    throw SimError(ErrorCode::NonPositiveParameter, "target and per-node bandwidth must be > 0");
  }
  return target_bw / per_node_bw + (target_bw % per_node_bw != 0 ? 1 : 0);
}

}  // namespace nvsim
