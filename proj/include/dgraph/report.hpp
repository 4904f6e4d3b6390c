#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dgraph/runtime.hpp"

namespace dgraph {

/// Everything needed to reproduce one run: algorithm, graph source, runtime
/// knobs, and algorithm parameters.
struct RunSpec {
    std::string algo;                    // tc | pagerank | bfs
    std::string graph;                   // file path or urand-S-D-SEED / kron-S-F-SEED
    std::string transport = "inproc";
    std::uint32_t localities = 1;
    std::uint32_t workers = 2;
    std::uint32_t reserved = 1;
    std::uint32_t parts = 0;             // partitions per locality; 0 = 4 * workers
    std::uint32_t coalesce_k = 16;
    std::uint64_t coalesce_delay_us = 200;
    std::uint64_t injected_latency_us = 0;
    std::uint32_t reps = 3;

    std::uint32_t bfs_source = 0;
    bool bfs_batch = true;
    double damping = 0.85;
    double tolerance = 0;                // <= 0: 1e-7 * N
    std::uint32_t max_iters = 100;
    std::string dangling = "redistribute";

    std::uint32_t effective_parts() const { return parts ? parts : 4 * workers; }
};

struct RunReport {
    RunSpec spec;
    std::string status = "ok";  // ok | failed
    std::string error;
    std::string verdict = "-";  // - | PASS | FAIL (when verification ran)

    std::uint64_t result = 0;        // tc: triangles, bfs: reached, pagerank: converged 0/1
    std::uint32_t iterations = 0;    // pagerank iterations or bfs levels
    std::vector<double> rep_ms;
    double median_ms = 0;
    double min_ms = 0;

    std::vector<MetricsSnapshot> metrics;  // per locality
};

/// Stable comma-separated schema; text columns first, numbers after.
std::string csv_header();
std::string csv_row(const RunReport& r);

/// One JSON object per run, mirroring the CSV row plus per-repetition times
/// and per-locality counters.
std::string json_report(const RunReport& r);
std::string json_reports(const std::vector<RunReport>& rs);

/// Flat key-value dump of per-locality counters ("loc0.parcels_sent=...").
std::string counters_dump(const std::vector<MetricsSnapshot>& ms,
                          const std::vector<std::string>& action_names);

double median_of(std::vector<double> xs);

}  // namespace dgraph
