#include "dgraph/graph.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace dgraph {

void EdgeList::validate() const {
    for (std::size_t i = 0; i < edges.size(); ++i) {
        if (edges[i].src >= num_vertices || edges[i].dst >= num_vertices)
            throw std::invalid_argument("edge " + std::to_string(i) + " (" +
                                        std::to_string(edges[i].src) + "," +
                                        std::to_string(edges[i].dst) +
                                        ") has an endpoint out of range, num_vertices=" +
                                        std::to_string(num_vertices));
    }
}

CsrGraph::CsrGraph(std::uint32_t n, std::vector<std::uint64_t> offsets,
                   std::vector<VertexId> targets, bool sorted)
    : n_(n), offsets_(std::move(offsets)), targets_(std::move(targets)), sorted_(sorted) {
    if (offsets_.size() != static_cast<std::size_t>(n_) + 1)
        throw std::invalid_argument("offset array must have num_vertices+1 entries");
    if (offsets_.front() != 0 || offsets_.back() != targets_.size())
        throw std::invalid_argument("offset array endpoints do not match target array");
    if (!std::is_sorted(offsets_.begin(), offsets_.end()))
        throw std::invalid_argument("offset array must be non-decreasing");
}

std::span<const VertexId> CsrGraph::out_neighbors(VertexId u) const {
    if (u >= n_) throw std::out_of_range("vertex " + std::to_string(u) + " out of range");
    return {targets_.data() + offsets_[u], targets_.data() + offsets_[u + 1]};
}

std::uint64_t CsrGraph::out_degree(VertexId u) const {
    if (u >= n_) throw std::out_of_range("vertex " + std::to_string(u) + " out of range");
    return offsets_[u + 1] - offsets_[u];
}

bool CsrGraph::has_edge(VertexId u, VertexId v) const {
    if (!sorted_) throw std::logic_error("has_edge requires sorted adjacency");
    auto nb = out_neighbors(u);
    return std::binary_search(nb.begin(), nb.end(), v);
}

CsrGraph build_csr(const EdgeList& edges, bool sort_adjacency) {
    edges.validate();
    const std::uint32_t n = edges.num_vertices;

    // counting sort by source keeps input order within each group
    std::vector<std::uint64_t> offsets(static_cast<std::size_t>(n) + 1, 0);
    for (const Edge& e : edges.edges) ++offsets[e.src + 1];
    for (std::uint32_t u = 0; u < n; ++u) offsets[u + 1] += offsets[u];

    std::vector<VertexId> targets(edges.edges.size());
    std::vector<std::uint64_t> cursor(offsets.begin(), offsets.end() - 1);
    for (const Edge& e : edges.edges) targets[cursor[e.src]++] = e.dst;

    if (!sort_adjacency) return CsrGraph(n, std::move(offsets), std::move(targets), false);

    std::vector<std::uint64_t> out_offsets(static_cast<std::size_t>(n) + 1, 0);
    std::vector<VertexId> out_targets;
    out_targets.reserve(targets.size());
    for (std::uint32_t u = 0; u < n; ++u) {
        auto first = targets.begin() + static_cast<std::ptrdiff_t>(offsets[u]);
        auto last = targets.begin() + static_cast<std::ptrdiff_t>(offsets[u + 1]);
        std::sort(first, last);
        VertexId prev = kNoVertex;
        for (auto it = first; it != last; ++it) {
            if (*it == u || *it == prev) continue;  // self-loop or duplicate
            out_targets.push_back(*it);
            prev = *it;
        }
        out_offsets[u + 1] = out_targets.size();
    }
    return CsrGraph(n, std::move(out_offsets), std::move(out_targets), true);
}

EdgeList symmetrize(const EdgeList& edges) {
    edges.validate();
    std::vector<std::pair<VertexId, VertexId>> pairs;
    pairs.reserve(edges.edges.size());
    for (const Edge& e : edges.edges) {
        if (e.src == e.dst) continue;
        pairs.emplace_back(std::min(e.src, e.dst), std::max(e.src, e.dst));
    }
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());

    EdgeList out;
    out.num_vertices = edges.num_vertices;
    out.edges.reserve(pairs.size() * 2);
    for (auto [a, b] : pairs) {
        out.edges.push_back({a, b});
        out.edges.push_back({b, a});
    }
    return out;
}

CsrGraph transpose(const CsrGraph& g) {
    const std::uint32_t n = g.num_vertices();
    std::vector<std::uint64_t> offsets(static_cast<std::size_t>(n) + 1, 0);
    for (VertexId v : g.targets()) ++offsets[v + 1];
    for (std::uint32_t u = 0; u < n; ++u) offsets[u + 1] += offsets[u];

    std::vector<VertexId> targets(g.num_edges());
    std::vector<std::uint64_t> cursor(offsets.begin(), offsets.end() - 1);
    // visiting sources in ascending order keeps each in-neighbor range sorted
    for (std::uint32_t u = 0; u < n; ++u)
        for (VertexId v : g.out_neighbors(u)) targets[cursor[v]++] = u;

    return CsrGraph(n, std::move(offsets), std::move(targets), g.sorted_adjacency());
}

CsrGraph to_upper_dag(const CsrGraph& g) {
    if (!g.sorted_adjacency())
        throw std::invalid_argument("to_upper_dag requires sorted adjacency");
    const std::uint32_t n = g.num_vertices();
    std::vector<std::uint64_t> offsets(static_cast<std::size_t>(n) + 1, 0);
    std::vector<VertexId> targets;
    targets.reserve(g.num_edges() / 2);
    for (std::uint32_t u = 0; u < n; ++u) {
        auto nb = g.out_neighbors(u);
        auto it = std::upper_bound(nb.begin(), nb.end(), u);
        targets.insert(targets.end(), it, nb.end());
        offsets[u + 1] = targets.size();
    }
    return CsrGraph(n, std::move(offsets), std::move(targets), true);
}

std::vector<std::uint64_t> out_degrees(const CsrGraph& g) {
    std::vector<std::uint64_t> deg(g.num_vertices());
    for (std::uint32_t u = 0; u < g.num_vertices(); ++u)
        deg[u] = g.offsets()[u + 1] - g.offsets()[u];
    return deg;
}

}  // namespace dgraph
