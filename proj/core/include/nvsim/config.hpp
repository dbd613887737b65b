#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "nvsim/cluster.hpp"

namespace nvsim {

/// Reads a cluster description (JSON). Quantities are strings with explicit
/// units ("20 GB/s", "3 TB", "100 ns"). A node entry may carry "count": k
/// instead of "node_id" to expand into k consecutive nodes. Structural and
/// unit errors throw SimError naming the offending field path; the result is
/// not yet semantically validated (see validate_cluster).
ClusterSpec parse_cluster(std::string_view json_text);
ClusterSpec load_cluster(const std::filesystem::path& path);

/// Canonical JSON rendering with one explicit entry per node.
std::string cluster_to_json(const ClusterSpec& spec);

/// Reads a whole file; throws SimError(SyntaxError) when unreadable.
std::string read_text_file(const std::filesystem::path& path);

}  // namespace nvsim
