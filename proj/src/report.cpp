#include "dgraph/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include <json.hpp>

namespace dgraph {

double median_of(std::vector<double> xs) {
    if (xs.empty()) return 0;
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

namespace {

struct Totals {
    std::uint64_t parcels_sent = 0;
    std::uint64_t wire_messages = 0;
    std::uint64_t bytes_sent = 0;
    std::uint64_t remote_actions = 0;
    std::uint64_t graph_bytes_min = 0;
    std::uint64_t graph_bytes_max = 0;
    std::uint64_t graph_bytes_total = 0;
};

Totals totals_of(const std::vector<MetricsSnapshot>& ms) {
    Totals t;
    bool first = true;
    for (const auto& m : ms) {
        t.parcels_sent += m.parcels_sent;
        t.wire_messages += m.wire_messages_sent;
        t.bytes_sent += m.bytes_sent;
        t.remote_actions += m.remote_actions_served;
        t.graph_bytes_total += m.graph_storage_bytes;
        t.graph_bytes_min = first ? m.graph_storage_bytes : std::min(t.graph_bytes_min, m.graph_storage_bytes);
        t.graph_bytes_max = std::max(t.graph_bytes_max, m.graph_storage_bytes);
        first = false;
    }
    return t;
}

std::string fmt_ms(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    return buf;
}

}  // namespace

std::string csv_header() {
    return "algo,graph,transport,localities,workers,reserved,parts,coalesce_k,"
           "coalesce_delay_us,injected_latency_us,reps,status,verdict,"
           "result,iterations,median_ms,min_ms,parcels_sent,wire_messages,bytes_sent,"
           "remote_actions,graph_bytes_min,graph_bytes_max,graph_bytes_total";
}

std::string csv_row(const RunReport& r) {
    const Totals t = totals_of(r.metrics);
    std::ostringstream os;
    const RunSpec& s = r.spec;
    os << s.algo << ',' << s.graph << ',' << s.transport << ',' << s.localities << ','
       << s.workers << ',' << s.reserved << ',' << s.effective_parts() << ',' << s.coalesce_k
       << ',' << s.coalesce_delay_us << ',' << s.injected_latency_us << ',' << s.reps << ','
       << r.status << ',' << r.verdict << ',' << r.result << ',' << r.iterations << ','
       << fmt_ms(r.median_ms) << ',' << fmt_ms(r.min_ms) << ',' << t.parcels_sent << ','
       << t.wire_messages << ',' << t.bytes_sent << ',' << t.remote_actions << ','
       << t.graph_bytes_min << ',' << t.graph_bytes_max << ',' << t.graph_bytes_total;
    return os.str();
}

namespace {

nlohmann::json json_of(const RunReport& r) {
    const RunSpec& s = r.spec;
    const Totals t = totals_of(r.metrics);
    nlohmann::json j{
        {"algo", s.algo},
        {"graph", s.graph},
        {"transport", s.transport},
        {"localities", s.localities},
        {"workers", s.workers},
        {"reserved", s.reserved},
        {"parts", s.effective_parts()},
        {"coalesce_k", s.coalesce_k},
        {"coalesce_delay_us", s.coalesce_delay_us},
        {"injected_latency_us", s.injected_latency_us},
        {"reps", s.reps},
        {"status", r.status},
        {"verdict", r.verdict},
        {"result", r.result},
        {"iterations", r.iterations},
        {"median_ms", r.median_ms},
        {"min_ms", r.min_ms},
        {"parcels_sent", t.parcels_sent},
        {"wire_messages", t.wire_messages},
        {"bytes_sent", t.bytes_sent},
        {"remote_actions", t.remote_actions},
        {"graph_bytes_min", t.graph_bytes_min},
        {"graph_bytes_max", t.graph_bytes_max},
        {"graph_bytes_total", t.graph_bytes_total},
        {"rep_ms", r.rep_ms},
    };
    if (!r.error.empty()) j["error"] = r.error;
    nlohmann::json per_loc = nlohmann::json::array();
    for (std::size_t i = 0; i < r.metrics.size(); ++i) {
        const auto& m = r.metrics[i];
        per_loc.push_back({{"locality", i},
                           {"tasks_executed", m.tasks_executed},
                           {"steals", m.steals},
                           {"parcels_sent", m.parcels_sent},
                           {"parcels_received", m.parcels_received},
                           {"wire_messages_sent", m.wire_messages_sent},
                           {"bytes_sent", m.bytes_sent},
                           {"remote_actions_served", m.remote_actions_served},
                           {"graph_storage_bytes", m.graph_storage_bytes},
                           {"collective_rounds", m.collective_rounds}});
    }
    j["locality_metrics"] = std::move(per_loc);
    return j;
}

}  // namespace

std::string json_report(const RunReport& r) { return json_of(r).dump(2); }

std::string json_reports(const std::vector<RunReport>& rs) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rs) arr.push_back(json_of(r));
    return arr.dump(2);
}

std::string counters_dump(const std::vector<MetricsSnapshot>& ms,
                          const std::vector<std::string>& action_names) {
    std::ostringstream os;
    for (std::size_t i = 0; i < ms.size(); ++i) {
        const auto& m = ms[i];
        const std::string p = "loc" + std::to_string(i) + ".";
        os << p << "tasks_executed=" << m.tasks_executed << '\n'
           << p << "steals=" << m.steals << '\n'
           << p << "parcels_sent=" << m.parcels_sent << '\n'
           << p << "parcels_received=" << m.parcels_received << '\n'
           << p << "wire_messages_sent=" << m.wire_messages_sent << '\n'
           << p << "bytes_sent=" << m.bytes_sent << '\n'
           << p << "remote_actions_served=" << m.remote_actions_served << '\n'
           << p << "graph_storage_bytes=" << m.graph_storage_bytes << '\n'
           << p << "collective_rounds=" << m.collective_rounds << '\n';
        for (std::size_t a = 0; a < m.actions_served.size() && a < action_names.size(); ++a)
            if (m.actions_served[a])
                os << p << "served." << action_names[a] << '=' << m.actions_served[a] << '\n';
    }
    return os.str();
}

}  // namespace dgraph
