#include "dgraph/algorithms_seq.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dgraph {

std::uint64_t intersection_size(std::span<const VertexId> a, std::span<const VertexId> b) {
    std::uint64_t count = 0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] < b[j]) {
            ++i;
        } else if (b[j] < a[i]) {
            ++j;
        } else {
            ++count;
            ++i;
            ++j;
        }
    }
    return count;
}

std::uint64_t tc_seq(const CsrGraph& g) {
    if (!g.sorted_adjacency()) throw std::invalid_argument("tc_seq requires sorted adjacency");
    std::uint64_t triangles = 0;
    for (VertexId u = 0; u < g.num_vertices(); ++u) {
        auto u_neighbors = g[u];
        for (VertexId v : u_neighbors) triangles += intersection_size(u_neighbors, g[v]);
    }
    return triangles;
}

std::uint64_t tc_bruteforce(const EdgeList& edges, std::uint32_t max_vertices) {
    const std::uint32_t n = edges.num_vertices;
    if (n > max_vertices)
        throw std::invalid_argument("tc_bruteforce limited to " + std::to_string(max_vertices) +
                                    " vertices, got " + std::to_string(n));
    edges.validate();

    const std::size_t words = (n + 63) / 64;
    std::vector<std::uint64_t> adj(static_cast<std::size_t>(n) * words, 0);
    auto row = [&](VertexId u) { return adj.data() + static_cast<std::size_t>(u) * words; };
    for (const Edge& e : edges.edges) {
        if (e.src == e.dst) continue;
        row(e.src)[e.dst / 64] |= std::uint64_t{1} << (e.dst % 64);
        row(e.dst)[e.src / 64] |= std::uint64_t{1} << (e.src % 64);
    }

    // each triangle contributes its third vertex once per unordered edge
    std::uint64_t paths = 0;
    for (VertexId u = 0; u < n; ++u) {
        for (VertexId v = u + 1; v < n; ++v) {
            if (!(row(u)[v / 64] >> (v % 64) & 1)) continue;
            const std::uint64_t* a = row(u);
            const std::uint64_t* b = row(v);
            for (std::size_t w = 0; w < words; ++w) paths += std::popcount(a[w] & b[w]);
        }
    }
    return paths / 3;
}

PageRankResult pagerank_seq(const CsrGraph& g, const PageRankParams& params) {
    const std::uint32_t n = g.num_vertices();
    if (n == 0) throw std::invalid_argument("pagerank on empty graph");
    if (params.damping <= 0 || params.damping >= 1)
        throw std::invalid_argument("damping must lie in (0, 1)");

    const CsrGraph pull = transpose(g);
    const std::vector<std::uint64_t> deg = out_degrees(g);
    const double d = params.damping;
    const double tol = params.effective_tolerance(n);

    PageRankResult res;
    res.ranks.assign(n, 1.0 / n);
    std::vector<double> next(n);

    for (std::uint32_t iter = 0; iter < params.max_iters; ++iter) {
        double dangling = 0.0;
        if (params.dangling == DanglingMode::redistribute) {
            for (VertexId v = 0; v < n; ++v)
                if (deg[v] == 0) dangling += res.ranks[v];
        }
        const double base = (1.0 - d) / n + d * dangling / n;

        double delta = 0.0;
        for (VertexId u = 0; u < n; ++u) {
            double acc = 0.0;
            for (VertexId v : pull[u]) acc += res.ranks[v] / static_cast<double>(deg[v]);
            next[u] = base + d * acc;
            delta += std::abs(next[u] - res.ranks[u]);
        }
        res.ranks.swap(next);
        ++res.iterations;
        if (delta < tol) {
            res.converged = true;
            break;
        }
    }
    return res;
}

std::string validate_bfs_tree(const CsrGraph& g, VertexId source,
                              std::span<const std::uint32_t> distances,
                              std::span<const VertexId> parents) {
    const std::uint32_t n = g.num_vertices();
    if (distances.size() != n || parents.size() != n) return "array length != vertex count";
    if (source >= n) return "source out of range";
    if (distances[source] != 0) return "vertex " + std::to_string(source) + ": source distance != 0";
    if (parents[source] != source) return "vertex " + std::to_string(source) + ": source is not its own parent";
    for (VertexId v = 0; v < n; ++v) {
        if (v == source) continue;
        const bool unreached = distances[v] == kUnreached;
        if (unreached != (parents[v] == kNoVertex))
            return "vertex " + std::to_string(v) + ": distance and parent sentinels disagree";
        if (unreached) continue;
        const VertexId p = parents[v];
        if (p >= n) return "vertex " + std::to_string(v) + ": parent out of range";
        if (distances[p] == kUnreached || distances[p] + 1 != distances[v])
            return "vertex " + std::to_string(v) + ": parent is not one level closer";
        if (!g.has_edge(p, v))
            return "vertex " + std::to_string(v) + ": no edge from parent " + std::to_string(p);
    }
    return {};
}

BfsResult bfs_seq(const CsrGraph& g, VertexId source) {
    const std::uint32_t n = g.num_vertices();
    if (source >= n) throw std::out_of_range("bfs source out of range");

    BfsResult res;
    res.distances.assign(n, kUnreached);
    res.parents.assign(n, kNoVertex);
    res.distances[source] = 0;
    res.parents[source] = source;

    std::vector<VertexId> frontier{source};
    std::vector<VertexId> next;
    std::uint32_t level = 0;
    while (!frontier.empty()) {
        ++level;
        next.clear();
        // ascending scan order makes each parent the smallest-id
        // previous-level neighbor
        for (VertexId u : frontier) {
            for (VertexId v : g[u]) {
                if (res.distances[v] != kUnreached) continue;
                res.distances[v] = level;
                res.parents[v] = u;
                next.push_back(v);
            }
        }
        std::sort(next.begin(), next.end());
        frontier.swap(next);
    }
    return res;
}

}  // namespace dgraph
