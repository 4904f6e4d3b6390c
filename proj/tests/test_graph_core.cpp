#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <random>
#include <set>

#include "dgraph/edge_io.hpp"
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

EdgeList random_edges(std::uint32_t n, std::size_t m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    EdgeList el;
    el.num_vertices = n;
    for (std::size_t i = 0; i < m; ++i)
        el.edges.push_back({static_cast<VertexId>(rng() % n), static_cast<VertexId>(rng() % n)});
    return el;
}

void check_csr_invariants(const CsrGraph& g) {
    REQUIRE(g.offsets().size() == g.num_vertices() + 1);
    CHECK(g.offsets().front() == 0);
    CHECK(g.offsets().back() == g.num_edges());
    CHECK(std::is_sorted(g.offsets().begin(), g.offsets().end()));
    for (VertexId t : g.targets()) CHECK(t < g.num_vertices());
    if (g.sorted_adjacency()) {
        for (VertexId u = 0; u < g.num_vertices(); ++u) {
            auto nb = g[u];
            for (std::size_t i = 1; i < nb.size(); ++i) CHECK(nb[i - 1] < nb[i]);
            for (VertexId v : nb) CHECK(v != u);
        }
    }
}

std::multiset<std::pair<VertexId, VertexId>> edge_multiset(const CsrGraph& g) {
    std::multiset<std::pair<VertexId, VertexId>> s;
    for (VertexId u = 0; u < g.num_vertices(); ++u)
        for (VertexId v : g[u]) s.insert({u, v});
    return s;
}

}  // namespace

TEST_CASE("build_csr sorted example") {
    auto g = build_csr(make_edges(3, {{0, 1}, {0, 2}, {1, 2}}), true);
    CHECK(g.offsets() == std::vector<std::uint64_t>{0, 2, 3, 3});
    CHECK(g.targets() == std::vector<VertexId>{1, 2, 2});
    CHECK(g.sorted_adjacency());
}

TEST_CASE("build_csr empty graph") {
    EdgeList el;
    el.num_vertices = 4;
    auto g = build_csr(el, true);
    CHECK(g.offsets() == std::vector<std::uint64_t>{0, 0, 0, 0, 0});
    CHECK(g.targets().empty());
}

TEST_CASE("build_csr drops duplicates and self-loops when sorting") {
    auto g = build_csr(make_edges(2, {{0, 1}, {0, 1}, {1, 1}}), true);
    CHECK(g.offsets() == std::vector<std::uint64_t>{0, 1, 1});
    CHECK(g.targets() == std::vector<VertexId>{1});
}

TEST_CASE("build_csr keeps input order per source when not sorting") {
    auto g = build_csr(make_edges(3, {{1, 2}, {0, 2}, {1, 0}, {1, 2}}), false);
    CHECK_FALSE(g.sorted_adjacency());
    CHECK(g.targets() == std::vector<VertexId>{2, 2, 0, 2});
    CHECK(g.out_degree(1) == 3);
}

TEST_CASE("build_csr rejects out-of-range endpoints naming the edge") {
    auto el = make_edges(2, {{0, 1}});
    el.edges.push_back({1, 5});
    try {
        build_csr(el, true);
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        CHECK(std::string(e.what()).find("edge 1") != std::string::npos);
    }
}

TEST_CASE("symmetrize examples") {
    auto s = symmetrize(make_edges(2, {{0, 1}}));
    CHECK(s.edges == std::vector<Edge>{{0, 1}, {1, 0}});
    auto s2 = symmetrize(make_edges(2, {{0, 1}, {1, 0}}));
    CHECK(s2.edges == std::vector<Edge>{{0, 1}, {1, 0}});
    auto s3 = symmetrize(make_edges(3, {{2, 2}}));
    CHECK(s3.edges.empty());
}

TEST_CASE("symmetrize is idempotent") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        auto el = random_edges(40, 120, seed);
        auto once = symmetrize(el);
        auto twice = symmetrize(once);
        CHECK(once.edges == twice.edges);
    }
}

TEST_CASE("transpose keeps duplicates") {
    // 0 -> 1 twice, nothing else
    auto g = build_csr(make_edges(2, {{0, 1}, {0, 1}}), false);
    CHECK(g.offsets() == std::vector<std::uint64_t>{0, 2, 2});
    auto t = transpose(g);
    CHECK(t.offsets() == std::vector<std::uint64_t>{0, 0, 2});
    CHECK(t.targets() == std::vector<VertexId>{0, 0});
}

TEST_CASE("transpose of a chain reverses it") {
    auto g = build_csr(make_edges(3, {{0, 1}, {1, 2}}), true);
    auto t = transpose(g);
    CHECK(t.targets() == std::vector<VertexId>{0, 1});
    CHECK(t.out_degree(0) == 0);
    CHECK(t.out_degree(2) == 1);
}

TEST_CASE("transpose of a symmetric graph equals the original") {
    auto g = build_csr(symmetrize(random_edges(30, 90, 3)), true);
    CHECK(transpose(g) == g);
}

TEST_CASE("double transpose identity") {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        auto g_sorted = build_csr(random_edges(25, 70, seed), true);
        CHECK(transpose(transpose(g_sorted)) == g_sorted);
        auto g_raw = build_csr(random_edges(25, 70, seed + 100), false);
        CHECK(edge_multiset(transpose(transpose(g_raw))) == edge_multiset(g_raw));
    }
}

TEST_CASE("to_upper_dag examples") {
    auto k3 = build_csr(symmetrize(make_edges(3, {{0, 1}, {0, 2}, {1, 2}})), true);
    auto dag = to_upper_dag(k3);
    CHECK(dag.offsets() == std::vector<std::uint64_t>{0, 2, 3, 3});
    CHECK(dag.targets() == std::vector<VertexId>{1, 2, 2});

    auto path = build_csr(symmetrize(make_edges(3, {{0, 1}, {1, 2}})), true);
    auto pdag = to_upper_dag(path);
    CHECK(edge_multiset(pdag) == std::multiset<std::pair<VertexId, VertexId>>{{0, 1}, {1, 2}});
}

TEST_CASE("to_upper_dag halves symmetric edge counts") {
    auto g = build_csr(symmetrize(random_edges(50, 200, 9)), true);
    CHECK(to_upper_dag(g).num_edges() == g.num_edges() / 2);
}

TEST_CASE("to_upper_dag requires sorted adjacency") {
    auto g = build_csr(make_edges(2, {{0, 1}, {1, 0}}), false);
    CHECK_THROWS_AS(to_upper_dag(g), std::invalid_argument);
}

TEST_CASE("out_degree") {
    auto k3 = build_csr(symmetrize(make_edges(3, {{0, 1}, {0, 2}, {1, 2}})), true);
    CHECK(k3.out_degree(0) == 2);
    auto iso = build_csr(make_edges(3, {{0, 1}}), true);
    CHECK(iso.out_degree(2) == 0);
    CHECK_THROWS_AS(k3.out_degree(3), std::out_of_range);

    std::uint64_t sum = 0;
    for (VertexId u = 0; u < k3.num_vertices(); ++u) sum += k3.out_degree(u);
    CHECK(sum == k3.num_edges());
}

TEST_CASE("csr invariants hold for generated and random graphs") {
    check_csr_invariants(build_csr(random_edges(64, 300, 1), false));
    check_csr_invariants(build_csr(random_edges(64, 300, 2), true));
    check_csr_invariants(build_csr(symmetrize(generate_urand(8, 8, 5)), true));
    check_csr_invariants(build_csr(generate_kronecker(8, 8, 5), true));
}

// ---- generators ----

TEST_CASE("urand pair counts and exact symmetrized size") {
    auto e = generate_urand(10, 8, 1);
    CHECK(e.num_vertices == 1024);
    CHECK(e.edges.size() == 1024 * 8 / 2);
    // distinct pairs by construction, so the symmetrized sorted CSR holds
    // exactly degree * N directed entries
    auto g = build_csr(symmetrize(e), true);
    CHECK(g.num_edges() == 1024ull * 8);
}

TEST_CASE("urand scale-20 arithmetic") {
    // 2^20 vertices at average degree 32: floor(32 * 2^20 / 2) = 2^24 pairs,
    // giving 2^25 directed entries once both directions are present
    const std::uint64_t n = 1ull << 20;
    const std::uint64_t pairs = 32 * n / 2;
    CHECK(pairs == (1ull << 24));
    CHECK(2 * pairs == (1ull << 25));
    // same construction at desk scale: scale 14, degree 32
    auto e = generate_urand(14, 32, 7);
    CHECK(e.edges.size() == (1ull << 18));
    CHECK(build_csr(symmetrize(e), true).num_edges() == (1ull << 19));
}

TEST_CASE("urand degenerate and error cases") {
    auto e = generate_urand(1, 1, 3);
    CHECK(e.num_vertices == 2);
    CHECK(e.edges.size() == 1);
    CHECK_THROWS_AS(generate_urand(1, 100, 1), std::invalid_argument);  // exceeds capacity
    CHECK_THROWS_AS(generate_urand(0, 8, 1), std::invalid_argument);
    CHECK_THROWS_AS(generate_urand(31, 8, 1), std::invalid_argument);
}

TEST_CASE("generators are deterministic per seed") {
    CHECK(generate_urand(9, 8, 42).edges == generate_urand(9, 8, 42).edges);
    CHECK(generate_urand(9, 8, 42).edges != generate_urand(9, 8, 43).edges);
    CHECK(generate_kronecker(9, 8, 42).edges == generate_kronecker(9, 8, 42).edges);
    CHECK(generate_kronecker(9, 8, 42).edges != generate_kronecker(9, 8, 43).edges);
}

TEST_CASE("kronecker counts and validation") {
    auto e = generate_kronecker(4, 16, 1);
    CHECK(e.num_vertices == 16);
    CHECK(e.edges.size() == 256);
    CHECK_THROWS_AS(generate_kronecker(4, 16, 1, {0.5, 0.5, 0.5, 0.5}), std::invalid_argument);
    CHECK_THROWS_AS(generate_kronecker(4, 16, 1, {1.2, -0.2, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("kronecker with uniform quadrants matches urand degree shape") {
    // chi-square distance between the two degree histograms, pooled into
    // buckets with expected count >= 5; threshold from the Wilson-Hilferty
    // approximation at alpha = 0.001
    const std::uint32_t scale = 10;
    auto ek = generate_kronecker(scale, 8, 11, {0.25, 0.25, 0.25, 0.25});
    auto eu = generate_urand(scale, 16, 12);  // same expected pair budget: 8*N vs 16*N/2
    auto gk = build_csr(symmetrize(ek), true);
    auto gu = build_csr(symmetrize(eu), true);

    auto histogram = [](const CsrGraph& g) {
        std::vector<double> h(64, 0);
        for (VertexId u = 0; u < g.num_vertices(); ++u)
            h[std::min<std::uint64_t>(g.out_degree(u), 63)] += 1;
        return h;
    };
    auto hk = histogram(gk);
    auto hu = histogram(gu);

    // pool sparse tails so every expected bucket is >= 5
    std::vector<std::pair<double, double>> buckets;
    double ak = 0, au = 0;
    for (std::size_t d = 0; d < hk.size(); ++d) {
        ak += hk[d];
        au += hu[d];
        if (au >= 5 && ak >= 5) {
            buckets.push_back({ak, au});
            ak = au = 0;
        }
    }
    if (ak + au > 0) buckets.push_back({ak + 1e-9, au + 1e-9});

    double chi2 = 0;
    for (auto [obs, exp] : buckets) chi2 += (obs - exp) * (obs - exp) / exp;
    const double df = static_cast<double>(buckets.size()) - 1;
    const double z = 3.09;  // alpha = 0.001
    const double crit = df * std::pow(1 - 2 / (9 * df) + z * std::sqrt(2 / (9 * df)), 3);
    INFO("chi2=", chi2, " crit=", crit, " df=", df);
    CHECK(chi2 < crit);
}

TEST_CASE("skewed kronecker is heavy-tailed") {
    auto e = generate_kronecker(16, 16, 1, {0.57, 0.19, 0.19, 0.05});
    auto g = build_csr(symmetrize(e), true);
    std::uint64_t max_deg = 0, sum = 0;
    for (VertexId u = 0; u < g.num_vertices(); ++u) {
        max_deg = std::max(max_deg, g.out_degree(u));
        sum += g.out_degree(u);
    }
    const double mean = static_cast<double>(sum) / g.num_vertices();
    INFO("max=", max_deg, " mean=", mean);
    CHECK(static_cast<double>(max_deg) > 10.0 * mean);
}

// ---- edge list file I/O ----

TEST_CASE("edge list file format") {
    const std::string dir = std::filesystem::temp_directory_path().string();
    const std::string path = dir + "/dgraph_io_test.el";

    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("3 2\n0 1\n1 2\n", f);
        std::fclose(f);
        auto e = load_edge_list(path);
        CHECK(e.num_vertices == 3);
        CHECK(e.edges == std::vector<Edge>{{0, 1}, {1, 2}});
    }
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("4 0\n", f);
        std::fclose(f);
        auto e = load_edge_list(path);
        CHECK(e.num_vertices == 4);
        CHECK(e.edges.empty());
    }
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("3 2\n0 x\n1 2\n", f);
        std::fclose(f);
        try {
            load_edge_list(path);
            FAIL("expected parse error");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()).find(":2:") != std::string::npos);
        }
    }
    {
        std::FILE* f = std::fopen(path.c_str(), "wb");
        std::fputs("3 1\n0 7\n", f);
        std::fclose(f);
        CHECK_THROWS_AS(load_edge_list(path), std::runtime_error);
    }
    std::filesystem::remove(path);
}

TEST_CASE("edge list save/load round trip") {
    const std::string path =
        std::filesystem::temp_directory_path().string() + "/dgraph_io_rt.el";
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto e = random_edges(128, 500, seed);
        save_edge_list(e, path);
        auto back = load_edge_list(path);
        CHECK(back.num_vertices == e.num_vertices);
        CHECK(back.edges == e.edges);
    }
    CHECK_THROWS_AS(load_edge_list("/nonexistent/nowhere.el"), std::runtime_error);
    std::filesystem::remove(path);
}
