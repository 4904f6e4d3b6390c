// Command-line driver: graph generation, algorithm runs across runtime
// configurations, oracle verification, and benchmark sweeps.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dgraph/algorithms_dist.hpp"
#include "dgraph/algorithms_seq.hpp"
#include "dgraph/edge_io.hpp"
#include "dgraph/generators.hpp"
#include "dgraph/graph.hpp"
#include "dgraph/partition.hpp"
#include "dgraph/report.hpp"
#include "dgraph/runtime.hpp"

namespace {

using namespace dgraph;
using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

// ------------------------------------------------------------- CLI options

struct GraphOptions {
    std::string file;
    std::vector<std::uint64_t> urand;  // scale degree seed
    std::vector<std::uint64_t> kron;   // scale factor seed
    std::vector<double> probs;         // kron quadrant probabilities

    void add_to(CLI::App* app) {
        auto* f = app->add_option("--graph", file, "edge-list file to load");
        auto* u = app->add_option("--urand", urand,
                                  "generate a uniform random graph: SCALE DEGREE SEED")
                      ->expected(3);
        auto* k = app->add_option("--kron", kron,
                                  "generate a Kronecker (R-MAT) graph: SCALE FACTOR SEED")
                      ->expected(3);
        app->add_option("--probs", probs, "Kronecker quadrant probabilities a b c d")->expected(4);
        f->excludes(u)->excludes(k);
        u->excludes(k);
    }

    bool set() const { return !file.empty() || !urand.empty() || !kron.empty(); }

    std::string describe() const {
        if (!urand.empty())
            return "urand-" + std::to_string(urand[0]) + "-" + std::to_string(urand[1]) + "-" +
                   std::to_string(urand[2]);
        if (!kron.empty())
            return "kron-" + std::to_string(kron[0]) + "-" + std::to_string(kron[1]) + "-" +
                   std::to_string(kron[2]);
        return file;
    }

    EdgeList acquire() const {
        if (!urand.empty())
            return generate_urand(static_cast<std::uint32_t>(urand[0]),
                                  static_cast<std::uint32_t>(urand[1]), urand[2]);
        if (!kron.empty()) {
            auto p = kDefaultKroneckerProbs;
            if (!probs.empty()) p = {probs[0], probs[1], probs[2], probs[3]};
            return generate_kronecker(static_cast<std::uint32_t>(kron[0]),
                                      static_cast<std::uint32_t>(kron[1]), kron[2], p);
        }
        if (!file.empty()) return load_edge_list(file);
        throw CLI::ValidationError("one of --graph, --urand, --kron is required");
    }
};

struct RuntimeOptions {
    std::uint32_t localities = 1;
    std::uint32_t workers = 2;
    std::int32_t reserved = -1;  // -1: 1 when workers > 1, else 0
    std::uint32_t parts = 0;     // per locality; 0 = 4 * workers
    std::uint32_t coalesce_k = 16;
    std::uint64_t coalesce_delay_us = 200;
    std::uint64_t injected_latency_us = 0;
    std::string transport = "inproc";
    std::int32_t rank = -1;
    std::string peers;

    void add_to(CLI::App* app) {
        app->add_option("-L,--localities", localities, "locality count");
        app->add_option("-W,--workers", workers, "workers per locality");
        app->add_option("-R,--reserved", reserved, "workers reserved for remote requests");
        app->add_option("-P,--parts", parts, "partitions per locality (0 = 4*workers)");
        app->add_option("-K,--coalesce-k", coalesce_k, "parcels per coalesced wire message");
        app->add_option("--coalesce-delay-us", coalesce_delay_us, "max parcel age before flush");
        app->add_option("--injected-latency-us", injected_latency_us,
                        "simulated cross-locality delivery latency (inproc)");
        app->add_option("--transport", transport, "inproc | socket")
            ->check(CLI::IsMember({"inproc", "socket"}));
        app->add_option("--rank", rank, "socket: this process's locality (or env DGRAPH_RANK)");
        app->add_option("--peers", peers,
                        "socket: comma-separated host:port per locality (or env DGRAPH_PEERS)");
    }

    std::uint32_t effective_reserved() const {
        if (reserved >= 0) return static_cast<std::uint32_t>(reserved);
        return workers > 1 ? 1 : 0;
    }

    RuntimeConfig to_config() const {
        RuntimeConfig cfg;
        cfg.localities = localities;
        cfg.workers_per_locality = workers;
        cfg.reserved_remote_workers = effective_reserved();
        cfg.coalesce_max_messages = coalesce_k;
        cfg.coalesce_max_delay = std::chrono::microseconds(coalesce_delay_us);
        cfg.injected_latency = std::chrono::microseconds(injected_latency_us);
        if (transport == "socket") {
            cfg.transport = Transport::socket;
            std::int64_t r = rank;
            if (r < 0)
                if (const char* e = std::getenv("DGRAPH_RANK")) r = std::atol(e);
            if (r < 0) throw CLI::ValidationError("socket transport needs --rank or DGRAPH_RANK");
            cfg.rank = static_cast<std::uint32_t>(r);
            std::string plist = peers;
            if (plist.empty())
                if (const char* e = std::getenv("DGRAPH_PEERS")) plist = e;
            if (plist.empty())
                throw CLI::ValidationError("socket transport needs --peers or DGRAPH_PEERS");
            std::stringstream ss(plist);
            std::string item;
            while (std::getline(ss, item, ','))
                if (!item.empty()) cfg.peers.push_back(item);
            cfg.localities = static_cast<std::uint32_t>(cfg.peers.size());
        }
        return cfg;
    }
};

struct AlgoOptions {
    std::uint32_t source = 0;
    bool per_edge_remote = false;
    double damping = 0.85;
    double tol = 0;
    std::uint32_t max_iters = 100;
    std::string dangling = "redistribute";

    void add_to(CLI::App* app) {
        app->add_option("--source", source, "BFS root vertex");
        app->add_flag("--per-edge-remote", per_edge_remote,
                      "BFS: one parcel per crossing edge instead of per-destination batches");
        app->add_option("--damping", damping, "PageRank damping factor");
        app->add_option("--tol", tol, "PageRank L1 convergence threshold (0: 1e-7*N)");
        app->add_option("--max-iters", max_iters, "PageRank iteration cap");
        app->add_option("--dangling", dangling, "PageRank dangling-mass mode")
            ->check(CLI::IsMember({"redistribute", "skip"}));
    }

    PageRankParams pagerank_params() const {
        PageRankParams p;
        p.damping = damping;
        p.tolerance = tol;
        p.max_iters = max_iters;
        p.dangling = dangling == "skip" ? DanglingMode::skip : DanglingMode::redistribute;
        return p;
    }
};

RunSpec make_spec(const std::string& algo, const GraphOptions& g, const RuntimeOptions& r,
                  const AlgoOptions& a, std::uint32_t reps) {
    RunSpec s;
    s.algo = algo;
    s.graph = g.describe();
    s.transport = r.transport;
    s.localities = r.localities;
    s.workers = r.workers;
    s.reserved = r.effective_reserved();
    s.parts = r.parts;
    s.coalesce_k = r.coalesce_k;
    s.coalesce_delay_us = r.coalesce_delay_us;
    s.injected_latency_us = r.injected_latency_us;
    s.reps = reps;
    s.bfs_source = a.source;
    s.bfs_batch = !a.per_edge_remote;
    s.damping = a.damping;
    s.tolerance = a.tol;
    s.max_iters = a.max_iters;
    s.dangling = a.dangling;
    return s;
}

// ----------------------------------------------------------- run machinery

struct Prepared {
    EdgeList sym;      // symmetrized input (tc, bfs)
    CsrGraph base;     // bfs: symmetric csr; pagerank: directed csr; tc: symmetric csr
    CsrGraph dag;      // tc
    CsrGraph pull;     // pagerank
    PartitionMap map;
    DistCsrHandle dist;
    DistArrayHandle<double> deg;  // pagerank
};

Prepared prepare(Runtime& rt, const RunSpec& spec, const EdgeList& edges) {
    Prepared p;
    const std::uint32_t parts = spec.effective_parts();
    if (spec.algo == "tc") {
        p.sym = symmetrize(edges);
        p.base = build_csr(p.sym, true);
        p.dag = to_upper_dag(p.base);
        p.map = PartitionMap::block(p.dag.num_vertices(), rt.locality_count(), parts);
        p.dist = distribute(rt, p.dag, p.map, "g");
    } else if (spec.algo == "bfs") {
        p.sym = symmetrize(edges);
        p.base = build_csr(p.sym, true);
        p.map = PartitionMap::block(p.base.num_vertices(), rt.locality_count(), parts);
        p.dist = distribute(rt, p.base, p.map, "g");
    } else if (spec.algo == "pagerank") {
        p.base = build_csr(edges, true);
        p.pull = transpose(p.base);
        p.map = PartitionMap::block(p.base.num_vertices(), rt.locality_count(), parts);
        p.dist = distribute(rt, p.pull, p.map, "g");
        auto degs = out_degrees(p.base);
        std::vector<double> degd(degs.begin(), degs.end());
        p.deg = dist_array_scatter<double>(rt, p.map, "g.deg", degd);
    } else {
        throw CLI::ValidationError("unknown algorithm '" + spec.algo + "'");
    }
    return p;
}

struct RepOutcome {
    std::uint64_t result = 0;
    std::uint32_t iterations = 0;
    bool converged = false;
    // last run's handles for verification
    std::optional<DistArrayHandle<double>> ranks;
    std::optional<DistArrayHandle<std::uint32_t>> distances;
    std::optional<DistArrayHandle<VertexId>> parents;
    std::vector<IterationStats> stats;
};

RepOutcome run_rep(Runtime& rt, const RunSpec& spec, Prepared& p) {
    RepOutcome o;
    if (spec.algo == "tc") {
        auto r = tc_dist(rt, p.dist);
        o.result = r.triangles;
    } else if (spec.algo == "bfs") {
        BfsOptions bo;
        bo.batch_remote = spec.bfs_batch;
        auto r = bfs_dist(rt, p.dist, spec.bfs_source, bo);
        o.result = r.reached;
        o.iterations = static_cast<std::uint32_t>(r.stats.size());
        o.distances = r.distances;
        o.parents = r.parents;
        o.stats = std::move(r.stats);
    } else {
        PageRankParams params;
        params.damping = spec.damping;
        params.tolerance = spec.tolerance;
        params.max_iters = spec.max_iters;
        params.dangling = spec.dangling == "skip" ? DanglingMode::skip : DanglingMode::redistribute;
        auto r = pagerank_dist(rt, p.dist, p.deg, params);
        o.result = r.converged ? 1 : 0;
        o.iterations = r.iterations;
        o.converged = r.converged;
        o.ranks = r.ranks;
        o.stats = std::move(r.stats);
    }
    return o;
}

std::string verify_outcome(Runtime& rt, const RunSpec& spec, Prepared& p, RepOutcome& o,
                           bool corrupt) {
    const std::uint32_t n = p.base.num_vertices();
    if (n > (1u << 20))
        throw std::runtime_error(
            "graph too large for in-process oracle verification; rerun with scale <= 20");

    if (spec.algo == "tc") {
        const std::uint64_t expect = tc_seq(p.dag);
        if (o.result != expect)
            return "FAIL: triangles=" + std::to_string(o.result) + " oracle=" + std::to_string(expect);
        if (n <= 2048) {
            const std::uint64_t brute = tc_bruteforce(p.sym);
            if (o.result != brute)
                return "FAIL: triangles=" + std::to_string(o.result) +
                       " brute-force=" + std::to_string(brute);
        }
        return "PASS";
    }
    if (spec.algo == "bfs") {
        auto dist = gather(rt, *o.distances);
        auto par = gather(rt, *o.parents);
        if (corrupt && n > 1) dist[n / 2] = dist[n / 2] == 5 ? 6 : 5;  // verification self-test hook
        const BfsResult oracle = bfs_seq(p.base, spec.bfs_source);
        for (VertexId v = 0; v < n; ++v)
            if (dist[v] != oracle.distances[v])
                return "FAIL: vertex " + std::to_string(v) + " distance " + std::to_string(dist[v]) +
                       " oracle " + std::to_string(oracle.distances[v]);
        if (auto err = validate_bfs_tree(p.base, spec.bfs_source, dist, par); !err.empty())
            return "FAIL: parent tree invalid: " + err;
        return "PASS";
    }
    // pagerank
    PageRankParams params;
    params.damping = spec.damping;
    params.tolerance = spec.tolerance;
    params.max_iters = spec.max_iters;
    params.dangling = spec.dangling == "skip" ? DanglingMode::skip : DanglingMode::redistribute;
    const PageRankResult oracle = pagerank_seq(p.base, params);
    auto ranks = gather(rt, *o.ranks);
    double worst = 0;
    VertexId worst_v = 0;
    for (VertexId v = 0; v < n; ++v) {
        const double d = std::abs(ranks[v] - oracle.ranks[v]);
        if (d > worst) {
            worst = d;
            worst_v = v;
        }
    }
    if (worst > 1e-6)
        return "FAIL: vertex " + std::to_string(worst_v) + " rank differs from oracle by " +
               std::to_string(worst);
    return "PASS";
}

RunReport execute(const RunSpec& spec, const RuntimeOptions& ropts, const EdgeList& edges,
                  bool verify, bool corrupt) {
    RunReport rep;
    rep.spec = spec;
    RuntimeConfig cfg = ropts.to_config();
    Runtime rt(cfg);
    register_standard_actions(rt);
    rt.start();

    Prepared p = prepare(rt, spec, edges);
    RepOutcome last;
    for (std::uint32_t i = 0; i < spec.reps; ++i) {
        const auto t0 = Clock::now();
        RepOutcome o = run_rep(rt, spec, p);
        rep.rep_ms.push_back(ms_between(t0, Clock::now()));
        if (i > 0 && (o.result != last.result || o.iterations != last.iterations)) {
            rep.status = "failed";
            rep.error = "results differ across repetitions";
        }
        last = std::move(o);
    }
    rep.result = last.result;
    rep.iterations = last.iterations;
    rep.median_ms = median_of(rep.rep_ms);
    rep.min_ms = *std::min_element(rep.rep_ms.begin(), rep.rep_ms.end());
    if (verify && rep.status == "ok") rep.verdict = verify_outcome(rt, spec, p, last, corrupt);
    rep.metrics = rt.all_counters();
    rt.stop();
    return rep;
}

void emit(const RunReport& rep, const std::string& csv_path, const std::string& json_path,
          bool counters, const std::vector<std::string>& action_names) {
    const RunSpec& s = rep.spec;
    std::cout << s.algo << ' ' << s.graph << ": ";
    if (rep.status != "ok") {
        std::cout << "FAILED (" << rep.error << ")\n";
    } else if (s.algo == "tc") {
        std::cout << "triangles=" << rep.result;
    } else if (s.algo == "bfs") {
        std::cout << "reached=" << rep.result << " levels=" << rep.iterations;
    } else {
        std::cout << "converged=" << (rep.result ? "true" : "false")
                  << " iterations=" << rep.iterations;
    }
    if (rep.status == "ok") {
        std::printf(" reps=%u median=%.3fms min=%.3fms\n", s.reps, rep.median_ms, rep.min_ms);
        if (rep.verdict != "-") std::cout << "verify: " << rep.verdict << '\n';
    }
    auto write_to = [](const std::string& path, const std::string& text) {
        if (path == "-") {
            std::cout << text << '\n';
            return;
        }
        std::ofstream f(path, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + path);
        f << text << '\n';
    };
    if (!csv_path.empty()) write_to(csv_path, csv_header() + "\n" + csv_row(rep));
    if (!json_path.empty()) write_to(json_path, json_report(rep));
    if (counters) std::cout << counters_dump(rep.metrics, action_names);
}

// serve-only path for non-root socket ranks
int serve_rank(const RuntimeOptions& ropts) {
    RuntimeConfig cfg = ropts.to_config();
    Runtime rt(cfg);
    register_standard_actions(rt);
    rt.start();
    rt.serve();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"distributed graph analytics engine"};
    app.require_subcommand(1);

    // ---- generate ----
    auto* gen = app.add_subcommand("generate", "write a synthetic graph as an edge-list file");
    std::string gen_kind;
    std::uint32_t gen_scale = 10, gen_degree = 16, gen_factor = 16;
    std::uint64_t gen_seed = 1;
    std::vector<double> gen_probs;
    std::string gen_out = "graph.el";
    gen->add_option("kind", gen_kind, "urand | kron")->required()
        ->check(CLI::IsMember({"urand", "kron"}));
    gen->add_option("--scale", gen_scale, "log2 of the vertex count");
    gen->add_option("--degree", gen_degree, "urand: average vertex degree");
    gen->add_option("--factor", gen_factor, "kron: edges per vertex");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--probs", gen_probs, "kron quadrant probabilities a b c d")->expected(4);
    gen->add_option("-o,--out", gen_out, "output path");

    // ---- run / verify / bench ----
    GraphOptions run_graph, verify_graph, bench_graph;
    RuntimeOptions run_rt, verify_rt, bench_rt;
    AlgoOptions run_algo, verify_algo, bench_algo;
    std::string run_kind, verify_kind, bench_kind;
    std::uint32_t run_reps = 3, bench_reps = 3;
    bool run_verify = false, run_counters = false, verify_corrupt = false;
    std::string run_csv, run_json, bench_csv, bench_json;
    std::vector<std::uint32_t> bench_localities{1, 2, 4};
    std::vector<std::uint64_t> bench_latencies{0};

    auto* run = app.add_subcommand("run", "run a distributed algorithm and report times/counters");
    run->add_option("algo", run_kind, "tc | pagerank | bfs")->required()
        ->check(CLI::IsMember({"tc", "pagerank", "bfs"}));
    run_graph.add_to(run);
    run_rt.add_to(run);
    run_algo.add_to(run);
    run->add_option("--reps", run_reps, "repetitions (median reported)");
    run->add_flag("--verify", run_verify, "compare against the sequential oracle");
    run->add_flag("--counters", run_counters, "dump per-locality counters");
    run->add_option("--csv", run_csv, "write the report row as CSV ('-' for stdout)");
    run->add_option("--json", run_json, "write the report as JSON ('-' for stdout)");

    auto* verify = app.add_subcommand("verify", "run distributed vs sequential and report PASS/FAIL");
    verify->add_option("algo", verify_kind, "tc | pagerank | bfs")->required()
        ->check(CLI::IsMember({"tc", "pagerank", "bfs"}));
    verify_graph.add_to(verify);
    verify_rt.add_to(verify);
    verify_algo.add_to(verify);
    verify->add_flag("--corrupt", verify_corrupt)->group("");  // verification self-test hook

    auto* bench = app.add_subcommand("bench", "sweep locality/latency configurations, emit a table");
    bench->add_option("algo", bench_kind, "tc | pagerank | bfs")->required()
        ->check(CLI::IsMember({"tc", "pagerank", "bfs"}));
    bench_graph.add_to(bench);
    bench_rt.add_to(bench);
    bench_algo.add_to(bench);
    bench->add_option("--reps", bench_reps, "repetitions per configuration");
    bench->add_option("--localities-list", bench_localities, "locality counts to sweep");
    bench->add_option("--latency-list-us", bench_latencies, "injected latencies to sweep");
    bench->add_option("--csv", bench_csv, "CSV output path ('-' for stdout; default stdout)");
    bench->add_option("--json", bench_json, "JSON output path ('-' for stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            EdgeList e;
            if (gen_kind == "urand") {
                e = generate_urand(gen_scale, gen_degree, gen_seed);
            } else {
                auto p = kDefaultKroneckerProbs;
                if (!gen_probs.empty()) p = {gen_probs[0], gen_probs[1], gen_probs[2], gen_probs[3]};
                e = generate_kronecker(gen_scale, gen_factor, gen_seed, p);
            }
            save_edge_list(e, gen_out);
            std::cout << "wrote " << gen_out << ": N=" << e.num_vertices
                      << " M=" << e.edges.size() << '\n';
            return 0;
        }

        if (run->parsed()) {
            RuntimeConfig probe = run_rt.to_config();
            if (probe.transport == Transport::socket && probe.rank != 0) return serve_rank(run_rt);
            run_rt.localities = probe.localities;
            RunSpec spec = make_spec(run_kind, run_graph, run_rt, run_algo, run_reps);
            EdgeList edges = run_graph.acquire();
            RunReport rep = execute(spec, run_rt, edges, run_verify, false);
            // action names only needed for the counters dump
            std::vector<std::string> names;
            if (run_counters) {
                Runtime tmp(RuntimeConfig{});
                register_standard_actions(tmp);
                names = tmp.action_names();
            }
            emit(rep, run_csv, run_json, run_counters, names);
            if (rep.status != "ok") return 2;
            if (run_verify && rep.verdict != "PASS") return 1;
            return 0;
        }

        if (verify->parsed()) {
            RuntimeConfig probe = verify_rt.to_config();
            if (probe.transport == Transport::socket && probe.rank != 0) return serve_rank(verify_rt);
            verify_rt.localities = probe.localities;
            RunSpec spec = make_spec(verify_kind, verify_graph, verify_rt, verify_algo, 1);
            spec.reps = 1;
            EdgeList edges = verify_graph.acquire();
            RunReport rep = execute(spec, verify_rt, edges, true, verify_corrupt);
            std::cout << rep.verdict << '\n';
            return rep.verdict == "PASS" ? 0 : 1;
        }

        if (bench->parsed()) {
            if (bench_rt.transport != "inproc")
                throw CLI::ValidationError("bench sweeps are inproc-only");
            EdgeList edges = bench_graph.acquire();
            std::vector<RunReport> rows;
            for (std::uint32_t L : bench_localities) {
                for (std::uint64_t lat : bench_latencies) {
                    RuntimeOptions ro = bench_rt;
                    ro.localities = L;
                    ro.injected_latency_us = lat;
                    RunSpec spec = make_spec(bench_kind, bench_graph, ro, bench_algo, bench_reps);
                    RunReport rep;
                    try {
                        rep = execute(spec, ro, edges, false, false);
                    } catch (const std::exception& e) {
                        rep.spec = spec;
                        rep.status = "failed";
                        rep.error = e.what();
                    }
                    rows.push_back(std::move(rep));
                }
            }
            std::ostringstream csv;
            csv << csv_header() << '\n';
            for (const auto& r : rows) csv << csv_row(r) << '\n';
            if (bench_csv.empty() || bench_csv == "-") {
                std::cout << csv.str();
            } else {
                std::ofstream f(bench_csv, std::ios::binary);
                f << csv.str();
            }
            if (!bench_json.empty()) {
                if (bench_json == "-") {
                    std::cout << json_reports(rows) << '\n';
                } else {
                    std::ofstream f(bench_json, std::ios::binary);
                    f << json_reports(rows) << '\n';
                }
            }
            for (const auto& r : rows)
                if (r.status != "ok") return 2;
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
