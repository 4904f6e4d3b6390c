#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace dgraph {

using VertexId = std::uint32_t;

/// Sentinel for "no vertex" (absent parent, unvisited, ...).
inline constexpr VertexId kNoVertex = 0xFFFFFFFFu;

struct Edge {
    VertexId src = 0;
    VertexId dst = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

/// A plain edge list over vertices [0, num_vertices).
struct EdgeList {
    std::uint32_t num_vertices = 0;
    std::vector<Edge> edges;

    /// Throws std::invalid_argument naming the first edge with an endpoint out of range.
    void validate() const;
};

/// Immutable compressed-sparse-row adjacency. The vertex array holds offsets
/// into a flat target array; neighbors of u live at targets[offsets[u] .. offsets[u+1]).
/// When sorted_adjacency() is true every neighbor range is strictly ascending,
/// which implies no duplicate edges and no self-loops.
class CsrGraph {
public:
    CsrGraph() : offsets_{0} {}
    CsrGraph(std::uint32_t n, std::vector<std::uint64_t> offsets, std::vector<VertexId> targets,
             bool sorted);

    std::uint32_t num_vertices() const { return n_; }
    std::uint64_t num_edges() const { return targets_.size(); }
    bool sorted_adjacency() const { return sorted_; }

    /// Neighbor range of u as a view; u is range-checked.
    std::span<const VertexId> out_neighbors(VertexId u) const;
    std::span<const VertexId> operator[](VertexId u) const { return out_neighbors(u); }

    /// offsets[u+1] - offsets[u]; throws std::out_of_range for u >= N.
    std::uint64_t out_degree(VertexId u) const;

    /// True when (u,v) is present; requires sorted adjacency (binary search).
    bool has_edge(VertexId u, VertexId v) const;

    const std::vector<std::uint64_t>& offsets() const { return offsets_; }
    const std::vector<VertexId>& targets() const { return targets_; }

    friend bool operator==(const CsrGraph&, const CsrGraph&) = default;

private:
    std::uint32_t n_ = 0;
    std::vector<std::uint64_t> offsets_;  // length N+1, offsets_[0] == 0
    std::vector<VertexId> targets_;       // length M
    bool sorted_ = false;
};

/// Groups edges by source. With sort_adjacency each neighbor range is sorted
/// ascending with duplicates and self-loops dropped; otherwise edges keep
/// their input order within each source group.
CsrGraph build_csr(const EdgeList& edges, bool sort_adjacency);

/// Returns an edge list where every (u,v), u != v, appears in both directions
/// exactly once; self-loops are dropped. Output is sorted and deterministic.
EdgeList symmetrize(const EdgeList& edges);

/// Reverses every edge. Duplicates are retained; sorted adjacency is preserved.
CsrGraph transpose(const CsrGraph& g);

/// Keeps only neighbors greater than the source, turning a symmetric simple
/// graph into an acyclic "upper" half with each undirected edge kept once.
/// Requires sorted adjacency.
CsrGraph to_upper_dag(const CsrGraph& g);

/// out_degree over the whole graph as a flat vector.
std::vector<std::uint64_t> out_degrees(const CsrGraph& g);

}  // namespace dgraph
