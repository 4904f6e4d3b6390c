#include <doctest.h>

#include <cmath>
#include <numeric>
#include <queue>
#include <random>

#include "dgraph/algorithms_seq.hpp"
#include "dgraph/generators.hpp"
#include "dgraph/graph.hpp"

using namespace dgraph;

namespace {

EdgeList make_edges(std::uint32_t n, std::initializer_list<std::pair<VertexId, VertexId>> es) {
    EdgeList el;
    el.num_vertices = n;
    for (auto [u, v] : es) el.edges.push_back({u, v});
    return el;
}

EdgeList complete_graph(std::uint32_t n) {
    EdgeList el;
    el.num_vertices = n;
    for (VertexId u = 0; u < n; ++u)
        for (VertexId v = u + 1; v < n; ++v) el.edges.push_back({u, v});
    return symmetrize(el);
}

EdgeList random_sym(std::uint32_t n, std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    EdgeList el;
    el.num_vertices = n;
    for (std::size_t i = 0; i < m; ++i)
        el.edges.push_back({static_cast<VertexId>(rng() % n), static_cast<VertexId>(rng() % n)});
    return symmetrize(el);
}

// Dense-matrix power iteration, written against the adjacency matrix rather
// than any CSR machinery; the independent check for pagerank_seq.
std::vector<double> dense_pagerank(const EdgeList& edges, const PageRankParams& p,
                                   std::uint32_t* iters_out = nullptr) {
    const std::uint32_t n = edges.num_vertices;
    std::vector<std::vector<std::uint8_t>> adj(n, std::vector<std::uint8_t>(n, 0));
    for (const Edge& e : edges.edges)
        if (e.src != e.dst) adj[e.src][e.dst] = 1;  // dedup + drop self loops
    std::vector<double> outdeg(n, 0);
    for (VertexId u = 0; u < n; ++u)
        for (VertexId v = 0; v < n; ++v) outdeg[u] += adj[u][v];

    const double d = p.damping;
    const double tol = p.effective_tolerance(n);
    std::vector<double> pr(n, 1.0 / n), next(n);
    std::uint32_t iters = 0;
    for (; iters < p.max_iters;) {
        double dangling = 0;
        if (p.dangling == DanglingMode::redistribute)
            for (VertexId v = 0; v < n; ++v)
                if (outdeg[v] == 0) dangling += pr[v];
        double delta = 0;
        for (VertexId u = 0; u < n; ++u) {
            double acc = 0;
            for (VertexId v = 0; v < n; ++v)
                if (adj[v][u]) acc += pr[v] / outdeg[v];
            next[u] = (1 - d) / n + d * dangling / n + d * acc;
            delta += std::abs(next[u] - pr[u]);
        }
        pr.swap(next);
        ++iters;
        if (delta < tol) break;
    }
    if (iters_out) *iters_out = iters;
    return pr;
}

// Plain FIFO-queue BFS; distances only, no level structure shared with bfs_seq.
std::vector<std::uint32_t> queue_bfs(const CsrGraph& g, VertexId source) {
    std::vector<std::uint32_t> dist(g.num_vertices(), kUnreached);
    std::queue<VertexId> q;
    dist[source] = 0;
    q.push(source);
    while (!q.empty()) {
        VertexId u = q.front();
        q.pop();
        for (VertexId v : g[u])
            if (dist[v] == kUnreached) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
    }
    return dist;
}

}  // namespace

TEST_CASE("intersection_size") {
    std::vector<VertexId> a{1, 2, 3}, b{2, 3, 4}, e{};
    CHECK(intersection_size(a, b) == 2);
    CHECK(intersection_size(a, e) == 0);
    CHECK(intersection_size(a, a) == 3);
}

TEST_CASE("tc_seq basics") {
    auto k3 = to_upper_dag(build_csr(complete_graph(3), true));
    CHECK(tc_seq(k3) == 1);
    auto path = to_upper_dag(build_csr(symmetrize(make_edges(3, {{0, 1}, {1, 2}})), true));
    CHECK(tc_seq(path) == 0);
    CHECK_THROWS_AS(tc_seq(build_csr(make_edges(2, {{0, 1}}), false)), std::invalid_argument);
}

TEST_CASE("tc_bruteforce basics") {
    CHECK(tc_bruteforce(complete_graph(4)) == 4);
    auto k3_iso = complete_graph(3);
    k3_iso.num_vertices = 4;  // add an isolated vertex
    CHECK(tc_bruteforce(k3_iso) == 1);
    EdgeList empty;
    empty.num_vertices = 10;
    CHECK(tc_bruteforce(empty) == 0);
    EdgeList big;
    big.num_vertices = 5000;
    CHECK_THROWS_AS(tc_bruteforce(big), std::invalid_argument);
}

TEST_CASE("tc_seq equals brute force on random graphs") {
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
        const std::uint32_t n = 32 + 60 * static_cast<std::uint32_t>(seed);
        auto sym = random_sym(n, n * 4, seed);
        auto dag = to_upper_dag(build_csr(sym, true));
        CHECK(tc_seq(dag) == tc_bruteforce(sym));
    }
    // denser instance near the property-test ceiling
    auto sym = random_sym(512, 6000, 99);
    CHECK(tc_seq(to_upper_dag(build_csr(sym, true))) == tc_bruteforce(sym));
}

TEST_CASE("tc_seq equals brute force on a urand graph") {
    auto sym = symmetrize(generate_urand(10, 8, 1));
    auto dag = to_upper_dag(build_csr(sym, true));
    CHECK(tc_seq(dag) == tc_bruteforce(sym));
}

TEST_CASE("pagerank two-cycle fixed point") {
    auto g = build_csr(make_edges(2, {{0, 1}, {1, 0}}), true);
    PageRankParams p;
    auto r = pagerank_seq(g, p);
    CHECK(r.converged);
    CHECK(r.ranks[0] == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(r.ranks[1] == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("pagerank single vertex") {
    EdgeList el;
    el.num_vertices = 1;
    auto g = build_csr(el, true);
    auto r = pagerank_seq(g, {});
    CHECK(r.ranks[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pagerank chain matches the dense oracle") {
    auto el = make_edges(3, {{0, 1}, {1, 2}});
    auto g = build_csr(el, true);
    PageRankParams p;
    p.tolerance = 1e-12;
    p.max_iters = 300;
    auto r = pagerank_seq(g, p);
    auto oracle = dense_pagerank(el, p);
    for (VertexId v = 0; v < 3; ++v)
        CHECK(r.ranks[v] == doctest::Approx(oracle[v]).epsilon(1e-9));
}

TEST_CASE("pagerank matches the dense oracle on random directed graphs") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 4; ++trial) {
        const std::uint32_t n = 20 + 15 * trial;
        EdgeList el;
        el.num_vertices = n;
        for (std::size_t i = 0; i < static_cast<std::size_t>(n) * 3; ++i)
            el.edges.push_back({static_cast<VertexId>(rng() % n), static_cast<VertexId>(rng() % n)});
        auto g = build_csr(el, true);
        for (auto mode : {DanglingMode::redistribute, DanglingMode::skip}) {
            PageRankParams p;
            p.dangling = mode;
            p.tolerance = 1e-11;
            p.max_iters = 500;
            auto r = pagerank_seq(g, p);
            auto oracle = dense_pagerank(el, p);
            for (VertexId v = 0; v < n; ++v)
                CHECK(r.ranks[v] == doctest::Approx(oracle[v]).epsilon(1e-8));
        }
    }
}

TEST_CASE("pagerank conserves mass at every iteration in redistribute mode") {
    auto sym = random_sym(60, 200, 17);
    auto g = build_csr(sym, true);
    for (std::uint32_t k = 1; k <= 12; ++k) {
        PageRankParams p;
        p.tolerance = 1e-300;
        p.max_iters = k;
        auto r = pagerank_seq(g, p);
        const double sum = std::accumulate(r.ranks.begin(), r.ranks.end(), 0.0);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("pagerank skip mode keeps mass in (0, 1]") {
    // chain has a dangling tail vertex
    auto g = build_csr(make_edges(3, {{0, 1}, {1, 2}}), true);
    PageRankParams p;
    p.dangling = DanglingMode::skip;
    auto r = pagerank_seq(g, p);
    const double sum = std::accumulate(r.ranks.begin(), r.ranks.end(), 0.0);
    CHECK(sum > 0);
    CHECK(sum <= 1.0 + 1e-12);
}

TEST_CASE("pagerank is invariant under vertex relabeling") {
    auto sym = random_sym(40, 150, 23);
    auto g = build_csr(sym, true);
    PageRankParams p;
    p.tolerance = 1e-11;
    p.max_iters = 300;
    auto base = pagerank_seq(g, p);

    std::vector<VertexId> perm(40);
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 rng(99);
    std::shuffle(perm.begin(), perm.end(), rng);
    EdgeList relabeled;
    relabeled.num_vertices = 40;
    for (const Edge& e : sym.edges) relabeled.edges.push_back({perm[e.src], perm[e.dst]});
    auto r2 = pagerank_seq(build_csr(relabeled, true), p);
    for (VertexId v = 0; v < 40; ++v)
        CHECK(r2.ranks[perm[v]] == doctest::Approx(base.ranks[v]).epsilon(1e-9));
}

TEST_CASE("bfs path and disconnected examples") {
    auto path = build_csr(symmetrize(make_edges(3, {{0, 1}, {1, 2}})), true);
    auto r = bfs_seq(path, 0);
    CHECK(r.distances == std::vector<std::uint32_t>{0, 1, 2});
    CHECK(r.parents == std::vector<VertexId>{0, 0, 1});

    auto two = build_csr(symmetrize(make_edges(4, {{0, 1}, {2, 3}})), true);
    auto r2 = bfs_seq(two, 0);
    CHECK(r2.distances[2] == kUnreached);
    CHECK(r2.parents[2] == kNoVertex);
    CHECK_THROWS_AS(bfs_seq(path, 9), std::out_of_range);
}

TEST_CASE("bfs parent is the smallest-id previous-level neighbor") {
    // 0-2, 0-3, 2-4, 3-4: both 2 and 3 sit at level 1; 4 must pick 2
    auto g = build_csr(symmetrize(make_edges(5, {{0, 2}, {0, 3}, {2, 4}, {3, 4}})), true);
    auto r = bfs_seq(g, 0);
    CHECK(r.distances[4] == 2);
    CHECK(r.parents[4] == 2);
}

TEST_CASE("bfs matches a queue-based reimplementation") {
    auto g = build_csr(symmetrize(generate_urand(10, 8, 2)), true);
    auto r = bfs_seq(g, 3);
    CHECK(r.distances == queue_bfs(g, 3));
}

TEST_CASE("bfs edge distances differ by at most one") {
    auto g = build_csr(random_sym(200, 500, 31), true);
    auto r = bfs_seq(g, 0);
    for (VertexId u = 0; u < g.num_vertices(); ++u) {
        if (r.distances[u] == kUnreached) continue;
        for (VertexId v : g[u]) {
            REQUIRE(r.distances[v] != kUnreached);
            const std::int64_t du = r.distances[u], dv = r.distances[v];
            CHECK(std::abs(du - dv) <= 1);
        }
    }
}

TEST_CASE("validate_bfs_tree accepts bfs_seq output and catches corruption") {
    auto g = build_csr(symmetrize(generate_urand(8, 6, 4)), true);
    auto r = bfs_seq(g, 1);
    CHECK(validate_bfs_tree(g, 1, r.distances, r.parents).empty());

    auto bad = r;
    VertexId victim = 2;
    while (bad.distances[victim] == kUnreached) ++victim;
    bad.distances[victim] += 1;
    auto msg = validate_bfs_tree(g, 1, bad.distances, bad.parents);
    CHECK_FALSE(msg.empty());
    CHECK(msg.find("vertex") != std::string::npos);
}
