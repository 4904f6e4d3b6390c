#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dgraph/graph.hpp"

namespace dgraph {

inline constexpr std::uint32_t kUnreached = 0xFFFFFFFFu;

struct BfsResult {
    std::vector<std::uint32_t> distances;  // hop counts, kUnreached when not reached
    std::vector<VertexId> parents;         // kNoVertex when not reached; parent[source] == source
};

enum class DanglingMode : std::uint8_t {
    redistribute,  // spread rank of zero-out-degree vertices uniformly
    skip,          // drop it
};

struct PageRankParams {
    double damping = 0.85;
    double tolerance = 0;  // L1 delta threshold; <= 0 means "derive 1e-7 * N"
    std::uint32_t max_iters = 100;
    DanglingMode dangling = DanglingMode::redistribute;

    double effective_tolerance(std::uint32_t n) const {
        return tolerance > 0 ? tolerance : 1e-7 * static_cast<double>(n);
    }
};

struct PageRankResult {
    std::vector<double> ranks;
    std::uint32_t iterations = 0;
    bool converged = false;
};

/// Size of the intersection of two strictly ascending id ranges (linear merge).
std::uint64_t intersection_size(std::span<const VertexId> a, std::span<const VertexId> b);

/// Triangle count of an upper-DAG graph (see to_upper_dag): sums
/// intersection_size(neighbors(u), neighbors(v)) over every edge (u,v).
/// Requires sorted adjacency.
std::uint64_t tc_seq(const CsrGraph& g);

/// Exhaustive triangle count straight from a symmetric simple edge list,
/// via adjacency-bitset intersection. Guarded to small graphs.
std::uint64_t tc_bruteforce(const EdgeList& edges, std::uint32_t max_vertices = 2048);

/// Power iteration from the uniform vector, pulling contributions over
/// in-neighbors (the transpose is formed internally), until the L1 step
/// delta drops below tolerance or max_iters is hit.
PageRankResult pagerank_seq(const CsrGraph& g, const PageRankParams& params);

/// Level-synchronous BFS; parent of each reached vertex is its smallest-id
/// neighbor on the previous level, making the whole result deterministic.
BfsResult bfs_seq(const CsrGraph& g, VertexId source);

/// Structural validity check of a BFS parent tree against its distances,
/// independent of any particular tie-breaking. Returns an empty string when
/// valid, otherwise a message naming the first offending vertex. Requires
/// sorted adjacency.
std::string validate_bfs_tree(const CsrGraph& g, VertexId source,
                              std::span<const std::uint32_t> distances,
                              std::span<const VertexId> parents);

}  // namespace dgraph
