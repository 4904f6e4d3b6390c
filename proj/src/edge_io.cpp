#include "dgraph/edge_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>

namespace dgraph {
namespace {

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

// Parses exactly two decimal fields from a line; empty-or-whitespace-only
// lines return false.
bool parse_two(const std::string& line, std::uint64_t& a, std::uint64_t& b) {
    const char* p = line.data();
    const char* end = p + line.size();
    auto skip_space = [&] {
        while (p != end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
    };
    skip_space();
    if (p == end) return false;
    auto r1 = std::from_chars(p, end, a);
    if (r1.ec != std::errc{}) throw std::invalid_argument("bad token");
    p = r1.ptr;
    skip_space();
    auto r2 = std::from_chars(p, end, b);
    if (r2.ec != std::errc{}) throw std::invalid_argument("bad token");
    p = r2.ptr;
    skip_space();
    if (p != end) throw std::invalid_argument("trailing characters");
    return true;
}

}  // namespace

void save_edge_list(const EdgeList& edges, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << edges.num_vertices << ' ' << edges.edges.size() << '\n';
    std::string buf;
    buf.reserve(1 << 16);
    char tmp[32];
    for (const Edge& e : edges.edges) {
        buf.append(tmp, std::snprintf(tmp, sizeof tmp, "%u %u\n", e.src, e.dst));
        if (buf.size() > (1 << 16) - 64) {
            out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
            buf.clear();
        }
    }
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw std::runtime_error("write failed for " + path);
}

EdgeList load_edge_list(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);

    std::string line;
    std::size_t lineno = 0;

    std::uint64_t n = 0, m = 0;
    for (;;) {
        if (!std::getline(in, line)) parse_fail(path, lineno, "missing header line \"N M\"");
        ++lineno;
        try {
            if (parse_two(line, n, m)) break;
        } catch (const std::invalid_argument&) {
            parse_fail(path, lineno, "malformed header, expected \"N M\"");
        }
    }
    if (n > 0xFFFFFFFFull) parse_fail(path, lineno, "vertex count too large");

    EdgeList out;
    out.num_vertices = static_cast<std::uint32_t>(n);
    out.edges.reserve(static_cast<std::size_t>(m));

    while (out.edges.size() < m) {
        if (!std::getline(in, line))
            parse_fail(path, lineno, "expected " + std::to_string(m) + " edges, got " +
                                         std::to_string(out.edges.size()));
        ++lineno;
        std::uint64_t a = 0, b = 0;
        bool got = false;
        try {
            got = parse_two(line, a, b);
        } catch (const std::invalid_argument&) {
            parse_fail(path, lineno, "malformed edge line");
        }
        if (!got) continue;  // blank line
        if (a >= n || b >= n)
            parse_fail(path, lineno, "vertex id out of range (num_vertices=" + std::to_string(n) + ")");
        out.edges.push_back({static_cast<VertexId>(a), static_cast<VertexId>(b)});
    }

    // anything left must be blank
    while (std::getline(in, line)) {
        ++lineno;
        std::uint64_t a, b;
        bool nonblank = true;
        try {
            nonblank = parse_two(line, a, b);
        } catch (const std::invalid_argument&) {
            parse_fail(path, lineno, "unexpected content after edge list");
        }
        if (nonblank) parse_fail(path, lineno, "more edges than declared in header");
    }
    return out;
}

}  // namespace dgraph
