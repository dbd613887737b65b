#include <gtest/gtest.h>

#include <string>

#include "nvsim/config.hpp"
#include "support.hpp"

using namespace nvsim;
using namespace nvsim::testing;

namespace {

const char* kCluster = R"({
  "format_version": 1,
  "external_fs_bw": "100 GB/s",
  "external_fs_capacity": "10 PB",
  "mode_switch_seconds": "5 min",
  "nodes": [
    {"count": 3, "dram_dimm_bytes": "16 GB", "dram_dimms_per_socket": 6,
     "bapm_dimm_bytes": "250 GB", "bapm_dimms_per_socket": 6,
     "dram_bw": "100 GB/s", "bapm_bw": "20 GB/s", "flops": "2 TFlop/s",
     "link_bw": "12.5 GB/s", "dram_latency": "100 ns"},
    {"node_id": 3, "dram_dimm_bytes": "16 GB", "dram_dimms_per_socket": 6,
     "dram_bw": "100 GB/s", "flops": "2 TFlop/s", "link_bw": "12.5 GB/s",
     "dram_latency": "100 ns", "initial_mode": "SLM"}
  ]
})";

std::string message_of(const std::string& text) {
  try {
    parse_cluster(text);
  } catch (const SimError& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(ClusterConfig, ParsesUnitsAndCounts) {
  const ClusterSpec c = parse_cluster(kCluster);
  ASSERT_EQ(c.nodes.size(), 4u);
  EXPECT_EQ(c.nodes[2].node_id, 2);
  EXPECT_EQ(c.nodes[0].bapm_bytes(), 3 * TB);
  EXPECT_EQ(c.nodes[0].dram_bytes(), 192 * GB);
  EXPECT_EQ(c.nodes[1].link_bw, 12'500'000'000ULL);
  EXPECT_EQ(c.nodes[0].channels_per_socket, 6u);
  EXPECT_EQ(c.nodes[0].slots_per_channel, 2u);
  EXPECT_FALSE(c.nodes[3].has_bapm());
  EXPECT_EQ(c.mode_switch_seconds, std::chrono::minutes{5});
  EXPECT_EQ(c.external_fs_capacity, 10'000 * TB);
  EXPECT_TRUE(validate_cluster(c).ok());
}

TEST(ClusterConfig, RoundTripsThroughCanonicalJson) {
  const ClusterSpec c = parse_cluster(kCluster);
  EXPECT_EQ(parse_cluster(cluster_to_json(c)), c);
  const ClusterSpec p = reference_cluster(5);
  EXPECT_EQ(parse_cluster(cluster_to_json(p)), p);
}

TEST(ClusterConfig, ErrorsNameTheField) {
  std::string bad = kCluster;
  bad.replace(bad.find("\"12.5 GB/s\""), 11, "\"12.5 GB\"");
  const std::string msg = message_of(bad);
  EXPECT_NE(msg.find("nodes[0].link_bw"), std::string::npos) << msg;

  EXPECT_EQ(error_of([] { parse_cluster("{"); }), ErrorCode::SyntaxError);
  EXPECT_EQ(error_of([] { parse_cluster("[]"); }), ErrorCode::SyntaxError);
  EXPECT_EQ(error_of([] { parse_cluster(R"({"external_fs_bw": "1 GB/s", "external_fs_capacity": "1 TB"})"); }),
            ErrorCode::SyntaxError);
  const std::string missing = message_of(R"({"external_fs_capacity": "1 TB", "nodes": []})");
  EXPECT_NE(missing.find("external_fs_bw"), std::string::npos) << missing;
}

TEST(ClusterConfig, RejectsUnknownModeAndTopology) {
  std::string mode = kCluster;
  mode.replace(mode.find("\"SLM\""), 5, "\"XLM\"");
  EXPECT_EQ(error_of([&] { parse_cluster(mode); }), ErrorCode::SyntaxError);
  std::string topo = kCluster;
  topo.insert(topo.find("\"nodes\""), "\"bisection_model\": \"torus\", ");
  EXPECT_EQ(error_of([&] { parse_cluster(topo); }), ErrorCode::SyntaxError);
}

TEST(ClusterConfig, ShippedClustersAreValid) {
  for (const char* name : {"small.json", "mixed.json"}) {
    const ClusterSpec c = load_cluster(std::string(NVSIM_SOURCE_DIR) + "/data/clusters/" + name);
    EXPECT_TRUE(validate_cluster(c).ok()) << name;
  }
}

TEST(ClusterConfig, MissingFileIsAnError) {
  EXPECT_EQ(error_of([] { load_cluster("/nonexistent/cluster.json"); }), ErrorCode::SyntaxError);
}
