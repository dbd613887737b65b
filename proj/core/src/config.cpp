#include "nvsim/config.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "json_util.hpp"

namespace nvsim {
namespace {

using detail::Field;
using detail::json;

constexpr std::uint64_t kClusterFormatVersion = 1;

std::uint32_t small_count(const Field& f) {
  const std::uint64_t v = f.unsigned_int();
  if (v > std::numeric_limits<std::uint32_t>::max()) f.fail(ErrorCode::SyntaxError, "count out of range");
  return static_cast<std::uint32_t>(v);
}

NodeSpec parse_node(const Field& f) {
  NodeSpec n;
  if (auto v = f.maybe("sockets")) n.sockets = small_count(*v);
  if (auto v = f.maybe("channels_per_socket")) n.channels_per_socket = small_count(*v);
  if (auto v = f.maybe("slots_per_channel")) n.slots_per_channel = small_count(*v);
  n.dram_dimm_bytes = f.at("dram_dimm_bytes").quantity(parse_bytes);
  n.dram_dimms_per_socket = small_count(f.at("dram_dimms_per_socket"));
  if (auto v = f.maybe("bapm_dimm_bytes")) n.bapm_dimm_bytes = v->quantity(parse_bytes);
  if (auto v = f.maybe("bapm_dimms_per_socket")) n.bapm_dimms_per_socket = small_count(*v);
  n.dram_bw = f.at("dram_bw").quantity(parse_bandwidth);
  if (auto v = f.maybe("bapm_bw")) n.bapm_bw = v->quantity(parse_bandwidth);
  n.flops = f.at("flops").quantity(parse_flops);
  n.link_bw = f.at("link_bw").quantity(parse_bandwidth);
  n.dram_latency = f.at("dram_latency").quantity(parse_duration);
  if (auto v = f.maybe("bapm_latency_ratio")) n.bapm_latency_ratio = v->number();
  if (auto v = f.maybe("initial_mode")) {
    auto mode = parse_memory_mode(v->string());
    if (!mode) v->fail(ErrorCode::SyntaxError, "expected \"SLM\" or \"DLM\"");
    n.initial_mode = *mode;
  }
  return n;
}

json node_to_json(const NodeSpec& n) {
  return json{
      {"node_id", n.node_id},
      {"sockets", n.sockets},
      {"channels_per_socket", n.channels_per_socket},
      {"slots_per_channel", n.slots_per_channel},
      {"dram_dimm_bytes", format_bytes(n.dram_dimm_bytes)},
      {"bapm_dimm_bytes", format_bytes(n.bapm_dimm_bytes)},
      {"dram_dimms_per_socket", n.dram_dimms_per_socket},
      {"bapm_dimms_per_socket", n.bapm_dimms_per_socket},
      {"dram_bw", format_bandwidth(n.dram_bw)},
      {"bapm_bw", format_bandwidth(n.bapm_bw)},
      {"flops", format_flops(n.flops)},
      {"link_bw", format_bandwidth(n.link_bw)},
      {"dram_latency", format_duration(n.dram_latency)},
      {"bapm_latency_ratio", n.bapm_latency_ratio},
      {"initial_mode", std::string(to_string(n.initial_mode))},
  };
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimError(ErrorCode::SyntaxError, fmt::format("cannot read '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ClusterSpec parse_cluster(std::string_view json_text) {
  const json doc = detail::parse_json_text(json_text, "cluster config");
  const Field root(doc, "");
  if (!doc.is_object()) root.fail(ErrorCode::SyntaxError, "cluster config must be a JSON object");

  if (auto v = root.maybe("format_version"); v && v->unsigned_int() != kClusterFormatVersion) {
    v->fail(ErrorCode::SyntaxError, fmt::format("unsupported format_version (expected {})", kClusterFormatVersion));
  }

  ClusterSpec spec;
  spec.external_fs_bw = root.at("external_fs_bw").quantity(parse_bandwidth);
  spec.external_fs_capacity = root.at("external_fs_capacity").quantity(parse_bytes);
  if (auto v = root.maybe("mode_switch_seconds")) spec.mode_switch_seconds = v->quantity(parse_duration);
  if (auto v = root.maybe("bisection_model")) {
    if (v->string() != "flat") v->fail(ErrorCode::SyntaxError, "only \"flat\" full bisection is supported");
  }
  if (auto v = root.maybe("distributed_fs_fraction")) spec.distributed_fs_fraction = v->number();
  if (auto v = root.maybe("fs_overhead")) spec.fs_overhead = v->number();

  const Field nodes = root.at("nodes");
  const std::size_t count = nodes.array_size();
  int next_id = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const Field entry = nodes.index(i);
    const NodeSpec proto = parse_node(entry);
    if (auto c = entry.maybe("count")) {
      if (entry.has("node_id")) entry.fail(ErrorCode::SyntaxError, "use either \"node_id\" or \"count\", not both");
      const std::uint64_t k = c->unsigned_int();
      if (k > 10'000'000) c->fail(ErrorCode::SyntaxError, "node count out of range");
      for (std::uint64_t j = 0; j < k; ++j) {
        NodeSpec n = proto;
        n.node_id = next_id++;
        spec.nodes.push_back(n);
      }
    } else {
      NodeSpec n = proto;
      const std::uint64_t id = entry.at("node_id").unsigned_int();
      if (id > static_cast<std::uint64_t>(std::numeric_limits<int>::max())) {
        entry.at("node_id").fail(ErrorCode::SyntaxError, "node_id out of range");
      }
      n.node_id = static_cast<int>(id);
      next_id = n.node_id + 1;
      spec.nodes.push_back(n);
    }
  }
  return spec;
}

ClusterSpec load_cluster(const std::filesystem::path& path) { return parse_cluster(read_text_file(path)); }

std::string cluster_to_json(const ClusterSpec& spec) {
  json nodes = json::array();
  for (const NodeSpec& n : spec.nodes) nodes.push_back(node_to_json(n));
  json doc{
      {"format_version", kClusterFormatVersion},
      {"external_fs_bw", format_bandwidth(spec.external_fs_bw)},
      {"external_fs_capacity", format_bytes(spec.external_fs_capacity)},
      {"mode_switch_seconds", format_duration(spec.mode_switch_seconds)},
      {"bisection_model", "flat"},
      {"distributed_fs_fraction", spec.distributed_fs_fraction},
      {"fs_overhead", spec.fs_overhead},
      {"nodes", std::move(nodes)},
  };
  return doc.dump(2) + "\n";
}

}  // namespace nvsim
