#pragma once

#include <cstdint>
#include <vector>

#include "dgraph/algorithms_seq.hpp"
#include "dgraph/partition.hpp"
#include "dgraph/runtime.hpp"

namespace dgraph {

/// Per-round progress record: one entry per PageRank iteration or BFS level.
struct IterationStats {
    std::uint32_t index = 0;
    double delta = 0;            // PageRank: global L1 step delta
    double mass = 0;             // PageRank: global rank sum after the step
    std::uint64_t frontier = 0;  // BFS: global next-frontier size
    std::uint64_t remote_ops = 0;
    double wall_ms = 0;
};

template <>
struct Wire<IterationStats> {
    static void write(ByteWriter& w, const IterationStats& s) {
        write_values(w, s.index, s.delta, s.mass, s.frontier, s.remote_ops, s.wall_ms);
    }
    static IterationStats read(ByteReader& r) {
        IterationStats s;
        s.index = read_value<std::uint32_t>(r);
        s.delta = read_value<double>(r);
        s.mass = read_value<double>(r);
        s.frontier = read_value<std::uint64_t>(r);
        s.remote_ops = read_value<std::uint64_t>(r);
        s.wall_ms = read_value<double>(r);
        return s;
    }
};

struct TcDistResult {
    std::uint64_t triangles = 0;
    std::uint64_t remote_ops = 0;  // remote intersection requests issued
};

struct PageRankDistResult {
    DistArrayHandle<double> ranks;
    std::uint32_t iterations = 0;
    bool converged = false;
    std::vector<IterationStats> stats;
};

struct BfsOptions {
    bool batch_remote = true;  // batch per destination; false sends one parcel per edge
};

struct BfsDistResult {
    DistArrayHandle<std::uint32_t> distances;
    DistArrayHandle<VertexId> parents;
    std::vector<IterationStats> stats;
    std::uint64_t reached = 0;  // vertices with a finite distance, source included
};

/// Registers tc/pagerank/bfs actions; identical call required on every locality.
void register_algorithm_actions(Runtime& rt);

/// Partition + algorithm actions in one call.
void register_standard_actions(Runtime& rt);

/// Distributed triangle count over a distributed upper-DAG graph (see
/// to_upper_dag). Each locality counts its partitions, intersecting locally
/// owned neighbor lists directly and shipping the source list to the
/// neighbor's owner otherwise; per-locality partials are folded with a final
/// all-reduce, the only collective in the run.
TcDistResult tc_dist(Runtime& rt, const DistCsrHandle& dag);

/// Distributed PageRank. `pull` is the distribution of the in-neighbor graph
/// (the transpose of the contribution graph; same thing for symmetric
/// inputs), `out_degree` the contribution graph's out-degrees. Remote
/// contributions are requested per (vertex, remote in-neighbor) pair and
/// accumulated by continuations as replies arrive.
PageRankDistResult pagerank_dist(Runtime& rt, const DistCsrHandle& pull,
                                 const DistArrayHandle<double>& out_degree,
                                 const PageRankParams& params);

/// Level-synchronous distributed BFS building a distributed parent tree
/// rooted at source. Distances are exact hop counts; parents are valid tree
/// edges but tie-breaking is scheduling-dependent.
BfsDistResult bfs_dist(Runtime& rt, const DistCsrHandle& g, VertexId source,
                       const BfsOptions& opts = {});

}  // namespace dgraph
