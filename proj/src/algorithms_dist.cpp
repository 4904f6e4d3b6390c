#include "dgraph/algorithms_dist.hpp"

#include <chrono>
#include <cmath>
#include <mutex>

namespace dgraph {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

// ------------------------------------------------------------------ triangle

struct TcState {
    std::shared_ptr<LocalCsr> g;
};

std::uint64_t tc_intersect_action(Locality& loc, std::uint32_t v, std::vector<VertexId> u_neighbors) {
    auto st = loc.store().get<TcState>("tc.cur");
    return intersection_size(u_neighbors, st->g->neighbors(v));
}

void tc_setup_action(Locality& loc, std::string graph) {
    auto st = std::make_shared<TcState>();
    st->g = loc.store().get<LocalCsr>(graph);
    loc.store().put("tc.cur", std::move(st));
}

std::pair<std::uint64_t, std::uint64_t> tc_run_action(Locality& loc) {
    Runtime& rt = loc.runtime();
    auto st = loc.store().get<TcState>("tc.cur");
    const LocalCsr& g = *st->g;
    const LocalityId me = loc.id();
    const ActionId intersect = rt.action_id("tc.intersect");

    auto parts = spawn_owned_partitions(
        rt, g.map, [&rt, &g, me, intersect](std::uint32_t p) -> std::pair<std::uint64_t, std::uint64_t> {
            const CsrSlice& s = g.slice(p);
            std::uint64_t local = 0;
            std::uint64_t remote = 0;
            std::vector<Future<std::uint64_t>> pending;
            for (VertexId u = s.first; u < s.last; ++u) {
                auto u_neighbors = s.neighbors(u);
                for (VertexId v : u_neighbors) {
                    auto [owner, vp] = g.map.owner_of(v);
                    if (owner == me) {
                        local += intersection_size(u_neighbors, g.slice(vp).neighbors(v));
                    } else {
                        pending.push_back(rt.remote_invoke<std::uint64_t>(
                            owner, intersect, v,
                            std::vector<VertexId>(u_neighbors.begin(), u_neighbors.end())));
                        ++remote;
                    }
                }
            }
            for (auto& f : pending) local += f.get();
            return {local, remote};
        });

    std::uint64_t sum = 0, remote = 0;
    for (auto& f : parts) {
        auto [c, r] = f.get();
        sum += c;
        remote += r;
    }
    const std::uint64_t global = rt.all_reduce(sum, ReduceOp::sum);
    return {global, remote};
}

// ------------------------------------------------------------------ pagerank

struct PrState {
    std::shared_ptr<LocalCsr> pull;
    std::shared_ptr<LocalArray<double>> pr;
    std::shared_ptr<LocalArray<double>> deg;
    std::shared_ptr<LocalArray<double>> accum;
};

void pr_setup_action(Locality& loc, std::string graph, std::string pr, std::string deg,
                     std::string accum) {
    auto st = std::make_shared<PrState>();
    st->pull = loc.store().get<LocalCsr>(graph);
    st->pr = loc.store().get<LocalArray<double>>(pr);
    st->deg = loc.store().get<LocalArray<double>>(deg);
    st->accum = loc.store().get<LocalArray<double>>(accum);
    loc.store().put("pr.cur", std::move(st));
}

std::pair<std::uint32_t, double> pr_contrib_action(Locality& loc, std::uint32_t u, std::uint32_t v) {
    auto st = loc.store().get<PrState>("pr.cur");
    return {u, st->pr->get(v) / st->deg->get(v)};
}

std::tuple<std::uint32_t, std::uint8_t, std::vector<IterationStats>> pr_run_action(
    Locality& loc, double damping, double tolerance, std::uint32_t max_iters,
    std::uint8_t dangling_skip) {
    Runtime& rt = loc.runtime();
    auto st = loc.store().get<PrState>("pr.cur");
    const PartitionMap& map = st->pull->map;
    const LocalityId me = loc.id();
    const ActionId contrib = rt.action_id("pr.contrib");
    const std::uint32_t n = map.num_vertices();
    const double d = damping;

    std::vector<IterationStats> stats;
    std::uint32_t iterations = 0;
    bool converged = false;

    for (std::uint32_t iter = 0; iter < max_iters; ++iter) {
        const auto t0 = Clock::now();
        std::atomic<std::uint64_t> remote_ops{0};

        // accumulate: each partition pulls contributions over its vertices'
        // in-neighbors, resolving local ones directly and requesting remote
        // ones from their owner
        auto acc_tasks = spawn_owned_partitions(rt, map, [&](std::uint32_t p) {
            const CsrSlice& s = st->pull->slice(p);
            std::vector<Future<Unit>> pending;
            std::uint64_t issued = 0;
            for (VertexId u = s.first; u < s.last; ++u) {
                st->accum->set(u, 0.0);
                for (VertexId v : s.neighbors(u)) {
                    auto [owner, vp] = map.owner_of(v);
                    (void)vp;
                    if (owner == me) {
                        st->accum->atomic_add(u, st->pr->get(v) / st->deg->get(v));
                    } else {
                        ++issued;
                        pending.push_back(
                            rt.remote_invoke<std::pair<std::uint32_t, double>>(owner, contrib, u, v)
                                .then([st](const std::pair<std::uint32_t, double>& uc) {
                                    st->accum->atomic_add(uc.first, uc.second);
                                }));
                    }
                }
            }
            wait_all(pending);
            remote_ops.fetch_add(issued, std::memory_order_relaxed);
        });
        wait_all(acc_tasks);

        // global dangling mass; doubles as the barrier that keeps anyone from
        // overwriting ranks while others may still be pulling them
        double local_dangling = 0.0;
        if (dangling_skip == 0) {
            const std::uint32_t first = me * map.parts_per_locality();
            for (std::uint32_t p = first; p < first + map.parts_per_locality(); ++p)
                for (VertexId u = map.part_begin(p); u < map.part_end(p); ++u)
                    if (st->deg->get(u) == 0.0) local_dangling += st->pr->get(u);
        }
        const double global_dangling = rt.all_reduce(local_dangling, ReduceOp::sum);
        const double base = dangling_skip == 0 ? (1.0 - d) / n + d * global_dangling / n
                                               : (1.0 - d) / n;

        auto apply_tasks = spawn_owned_partitions(rt, map, [&](std::uint32_t p) {
            double delta = 0.0, mass = 0.0;
            for (VertexId u = map.part_begin(p); u < map.part_end(p); ++u) {
                const double old = st->pr->get(u);
                const double next = base + d * st->accum->get(u);
                st->pr->set(u, next);
                delta += std::abs(next - old);
                mass += next;
            }
            return std::pair<double, double>{delta, mass};
        });
        double local_delta = 0.0, local_mass = 0.0;
        for (auto& f : apply_tasks) {
            auto [dl, ms] = f.get();
            local_delta += dl;
            local_mass += ms;
        }

        const auto folded = rt.all_reduce(
            std::array<double, 3>{local_delta, local_mass,
                                  static_cast<double>(remote_ops.load())},
            ReduceOp::sum);
        ++iterations;
        stats.push_back({iter, folded[0], folded[1], 0,
                         static_cast<std::uint64_t>(folded[2]), ms_since(t0)});
        if (folded[0] < tolerance) {
            converged = true;
            break;
        }
    }
    return {iterations, static_cast<std::uint8_t>(converged), std::move(stats)};
}

// ----------------------------------------------------------------------- bfs

struct BfsState {
    std::shared_ptr<LocalCsr> g;
    std::shared_ptr<LocalArray<std::uint32_t>> dist;
    std::shared_ptr<LocalArray<VertexId>> parent;
    std::mutex next_m;
    std::vector<VertexId> next;
};

void bfs_setup_action(Locality& loc, std::string graph, std::string dist, std::string parent) {
    auto st = std::make_shared<BfsState>();
    st->g = loc.store().get<LocalCsr>(graph);
    st->dist = loc.store().get<LocalArray<std::uint32_t>>(dist);
    st->parent = loc.store().get<LocalArray<VertexId>>(parent);
    loc.store().put("bfs.cur", std::move(st));
}

// claims a batch of (vertex, parent) pairs at the given level; returns how
// many were newly claimed (they join this locality's next frontier)
std::uint64_t bfs_visit_action(Locality& loc, std::uint32_t level, std::vector<std::uint32_t> flat) {
    auto st = loc.store().get<BfsState>("bfs.cur");
    std::vector<VertexId> claimed;
    for (std::size_t i = 0; i + 1 < flat.size(); i += 2) {
        const VertexId v = flat[i];
        if (st->dist->claim(v, kUnreached, level)) {
            st->parent->set(v, flat[i + 1]);
            claimed.push_back(v);
        }
    }
    if (!claimed.empty()) {
        std::lock_guard lk(st->next_m);
        st->next.insert(st->next.end(), claimed.begin(), claimed.end());
    }
    return claimed.size();
}

std::uint64_t bfs_visit_one_action(Locality& loc, std::uint32_t v, std::uint32_t parent,
                                   std::uint32_t level) {
    auto st = loc.store().get<BfsState>("bfs.cur");
    if (!st->dist->claim(v, kUnreached, level)) return 0;
    st->parent->set(v, parent);
    {
        std::lock_guard lk(st->next_m);
        st->next.push_back(v);
    }
    return 1;
}

std::vector<IterationStats> bfs_run_action(Locality& loc, std::uint32_t source,
                                           std::uint8_t batch_remote) {
    Runtime& rt = loc.runtime();
    auto st = loc.store().get<BfsState>("bfs.cur");
    const PartitionMap& map = st->g->map;
    const LocalityId me = loc.id();
    const ActionId visit = rt.action_id("bfs.visit");
    const ActionId visit1 = rt.action_id("bfs.visit_one");

    std::vector<VertexId> frontier;
    if (map.owner_of(source).first == me) {
        st->dist->set(source, 0);
        st->parent->set(source, source);
        frontier.push_back(source);
    }

    std::vector<IterationStats> stats;
    std::uint32_t level = 0;
    for (;;) {
        const auto t0 = Clock::now();
        const std::uint32_t next_level = level + 1;

        // expand in parts-per-locality chunks so suspended chunks hide behind
        // ready ones
        const std::uint32_t chunks = map.parts_per_locality();
        using Claim = std::pair<std::uint64_t, std::uint64_t>;  // (claimed, remote ops)
        std::vector<Future<Claim>> tasks;
        for (std::uint32_t c = 0; c < chunks; ++c) {
            const std::size_t lo = frontier.size() * c / chunks;
            const std::size_t hi = frontier.size() * (c + 1) / chunks;
            if (lo == hi) continue;
            tasks.push_back(rt.spawn([&, lo, hi]() -> Claim {
                std::uint64_t remote = 0;
                std::vector<VertexId> local_claims;
                std::vector<std::vector<std::uint32_t>> out(map.localities());
                std::vector<Future<std::uint64_t>> pending;
                for (std::size_t i = lo; i < hi; ++i) {
                    const VertexId u = frontier[i];
                    for (VertexId v : st->g->neighbors(u)) {
                        auto [owner, vp] = map.owner_of(v);
                        (void)vp;
                        if (owner == me) {
                            if (st->dist->claim(v, kUnreached, next_level)) {
                                st->parent->set(v, u);
                                local_claims.push_back(v);
                            }
                        } else if (batch_remote) {
                            out[owner].push_back(v);
                            out[owner].push_back(u);
                        } else {
                            pending.push_back(
                                rt.remote_invoke<std::uint64_t>(owner, visit1, v, u, next_level));
                            ++remote;
                        }
                    }
                }
                if (batch_remote) {
                    for (LocalityId l = 0; l < map.localities(); ++l) {
                        if (out[l].empty()) continue;
                        pending.push_back(rt.remote_invoke<std::uint64_t>(l, visit, next_level,
                                                                          std::move(out[l])));
                        ++remote;
                    }
                }
                std::uint64_t claimed = local_claims.size();
                if (!local_claims.empty()) {
                    std::lock_guard lk(st->next_m);
                    st->next.insert(st->next.end(), local_claims.begin(), local_claims.end());
                }
                for (auto& f : pending) claimed += f.get();
                return {claimed, remote};
            }));
        }
        std::uint64_t claimed = 0, remote = 0;
        for (auto& f : tasks) {
            auto [c, r] = f.get();
            claimed += c;
            remote += r;
        }

        // one fold settles both questions: the global next-frontier size and
        // that every locality's sends have been served (so `next` is complete)
        const auto folded = rt.all_reduce(
            std::array<double, 2>{static_cast<double>(claimed), static_cast<double>(remote)},
            ReduceOp::sum);
        const auto global_next = static_cast<std::uint64_t>(folded[0]);
        stats.push_back({level, 0, 0, global_next, static_cast<std::uint64_t>(folded[1]),
                         ms_since(t0)});
        if (global_next == 0) break;

        {
            std::lock_guard lk(st->next_m);
            frontier.swap(st->next);
            st->next.clear();
        }
        // nobody may start the new level before everyone swapped frontiers
        rt.all_reduce(std::uint64_t{0}, ReduceOp::sum);
        level = next_level;
    }
    return stats;
}

// ------------------------------------------------------------------ plumbing

void state_erase_action(Locality& loc, std::string name) { loc.store().erase(name); }

template <typename R, typename... Args>
std::vector<Future<std::conditional_t<std::is_void_v<R>, Unit, R>>> invoke_everywhere(
    Runtime& rt, ActionId action, const Args&... args) {
    std::vector<Future<std::conditional_t<std::is_void_v<R>, Unit, R>>> fs;
    for (LocalityId l = 0; l < rt.locality_count(); ++l)
        fs.push_back(rt.remote_invoke<R>(l, action, args...));
    return fs;
}

void teardown(Runtime& rt, const std::string& key) {
    wait_all(invoke_everywhere<void>(rt, rt.action_id("state.erase"), key));
}

}  // namespace

void register_algorithm_actions(Runtime& rt) {
    rt.register_action("tc.setup", &tc_setup_action);
    rt.register_action("tc.intersect", &tc_intersect_action);
    rt.register_action("tc.run", &tc_run_action, ActionKind::compute);
    rt.register_action("pr.setup", &pr_setup_action);
    rt.register_action("pr.contrib", &pr_contrib_action);
    rt.register_action("pr.run", &pr_run_action, ActionKind::compute);
    rt.register_action("bfs.setup", &bfs_setup_action);
    rt.register_action("bfs.visit", &bfs_visit_action);
    rt.register_action("bfs.visit_one", &bfs_visit_one_action);
    rt.register_action("bfs.run", &bfs_run_action, ActionKind::compute);
    rt.register_action("state.erase", &state_erase_action);
}

void register_standard_actions(Runtime& rt) {
    register_partition_actions(rt);
    register_algorithm_actions(rt);
}

TcDistResult tc_dist(Runtime& rt, const DistCsrHandle& dag) {
    if (!dag.sorted) throw std::invalid_argument("tc_dist needs sorted (upper-DAG) adjacency");
    wait_all(invoke_everywhere<void>(rt, rt.action_id("tc.setup"), dag.name));
    auto runs = invoke_everywhere<std::pair<std::uint64_t, std::uint64_t>>(rt, rt.action_id("tc.run"));
    TcDistResult res;
    bool first = true;
    for (auto& f : runs) {
        auto [count, remote] = f.get();
        if (first) {
            res.triangles = count;
            first = false;
        } else if (res.triangles != count) {
            throw std::runtime_error("triangle count disagreement across localities");
        }
        res.remote_ops += remote;
    }
    teardown(rt, "tc.cur");
    return res;
}

PageRankDistResult pagerank_dist(Runtime& rt, const DistCsrHandle& pull,
                                 const DistArrayHandle<double>& out_degree,
                                 const PageRankParams& params) {
    const std::uint32_t n = pull.map.num_vertices();
    if (n == 0) throw std::invalid_argument("pagerank on empty graph");
    if (params.damping <= 0 || params.damping >= 1)
        throw std::invalid_argument("damping must lie in (0, 1)");

    auto ranks = dist_array_new<double>(rt, pull.map, pull.name + ".pr", 1.0 / n);
    auto accum = dist_array_new<double>(rt, pull.map, pull.name + ".accum", 0.0);
    wait_all(invoke_everywhere<void>(rt, rt.action_id("pr.setup"), pull.name, ranks.name,
                                     out_degree.name, accum.name));

    using RunResult = std::tuple<std::uint32_t, std::uint8_t, std::vector<IterationStats>>;
    auto runs = invoke_everywhere<RunResult>(rt, rt.action_id("pr.run"), params.damping,
                                             params.effective_tolerance(n), params.max_iters,
                                             static_cast<std::uint8_t>(params.dangling ==
                                                                       DanglingMode::skip));
    wait_all(runs);

    PageRankDistResult res;
    res.ranks = ranks;
    auto [iters, conv, stats] = runs[0].get();
    res.iterations = iters;
    res.converged = conv != 0;
    res.stats = std::move(stats);

    teardown(rt, "pr.cur");
    dist_array_free(rt, accum);
    return res;
}

BfsDistResult bfs_dist(Runtime& rt, const DistCsrHandle& g, VertexId source,
                       const BfsOptions& opts) {
    if (source >= g.map.num_vertices()) throw std::out_of_range("bfs source out of range");

    auto dist = dist_array_new<std::uint32_t>(rt, g.map, g.name + ".dist", kUnreached);
    auto parent = dist_array_new<VertexId>(rt, g.map, g.name + ".parent", kNoVertex);
    wait_all(invoke_everywhere<void>(rt, rt.action_id("bfs.setup"), g.name, dist.name, parent.name));

    auto runs = invoke_everywhere<std::vector<IterationStats>>(
        rt, rt.action_id("bfs.run"), source, static_cast<std::uint8_t>(opts.batch_remote));
    wait_all(runs);

    BfsDistResult res;
    res.distances = dist;
    res.parents = parent;
    res.stats = runs[0].get();
    res.reached = 1;
    for (const auto& s : res.stats) res.reached += s.frontier;

    teardown(rt, "bfs.cur");
    return res;
}

}  // namespace dgraph
