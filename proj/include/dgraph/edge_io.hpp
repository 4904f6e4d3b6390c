#pragma once

#include <string>

#include "dgraph/graph.hpp"

namespace dgraph {

/// Text edge-list format: header line "N M" followed by M lines "src dst",
/// whitespace-separated decimal, UTF-8 with LF line endings.
void save_edge_list(const EdgeList& edges, const std::string& path);

/// Parses the format above. Throws std::runtime_error with the offending line
/// number on malformed input or out-of-range endpoints.
EdgeList load_edge_list(const std::string& path);

}  // namespace dgraph
