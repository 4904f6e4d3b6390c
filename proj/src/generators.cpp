#include "dgraph/generators.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <unordered_set>

namespace dgraph {
namespace {

// Rejection-sampled bounded uniform. mt19937_64 output is pinned by the
// standard, so results are identical across platforms (the distribution
// classes are not).
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    const std::uint64_t mask = bound <= 1 ? 0 : ~std::uint64_t{0} >> std::countl_zero(bound - 1);
    for (;;) {
        std::uint64_t v = rng() & mask;
        if (v < bound) return v;
    }
}

double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

EdgeList generate_urand(std::uint32_t scale, std::uint32_t avg_degree, std::uint64_t seed) {
    if (scale < 1 || scale > 30) throw std::invalid_argument("urand scale must be in [1, 30]");
    if (avg_degree < 1) throw std::invalid_argument("urand avg_degree must be >= 1");

    const std::uint64_t n = std::uint64_t{1} << scale;
    const std::uint64_t want = static_cast<std::uint64_t>(avg_degree) * n / 2;
    const std::uint64_t capacity = n * (n - 1) / 2;
    if (want > capacity)
        throw std::invalid_argument("urand edge count " + std::to_string(want) +
                                    " exceeds simple-graph capacity for 2^" +
                                    std::to_string(scale) + " vertices");

    std::mt19937_64 rng(seed);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(static_cast<std::size_t>(want * 4 / 3 + 8));

    EdgeList out;
    out.num_vertices = static_cast<std::uint32_t>(n);
    out.edges.reserve(static_cast<std::size_t>(want));
    while (out.edges.size() < want) {
        auto u = static_cast<VertexId>(uniform_below(rng, n));
        auto v = static_cast<VertexId>(uniform_below(rng, n));
        if (u == v) continue;
        const std::uint64_t key =
            (static_cast<std::uint64_t>(std::min(u, v)) << 32) | std::max(u, v);
        if (!seen.insert(key).second) continue;
        out.edges.push_back({u, v});
    }
    return out;
}

EdgeList generate_kronecker(std::uint32_t scale, std::uint32_t edge_factor, std::uint64_t seed,
                            std::array<double, 4> probs) {
    if (scale < 1 || scale > 30) throw std::invalid_argument("kronecker scale must be in [1, 30]");
    const double sum = probs[0] + probs[1] + probs[2] + probs[3];
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("kronecker quadrant probabilities must sum to 1");
    for (double p : probs)
        if (p < 0) throw std::invalid_argument("kronecker quadrant probabilities must be >= 0");

    const std::uint64_t n = std::uint64_t{1} << scale;
    const std::uint64_t m = static_cast<std::uint64_t>(edge_factor) * n;
    if (edge_factor != 0 && m / edge_factor != n)
        throw std::overflow_error("kronecker edge count overflows");

    std::mt19937_64 rng(seed);
    EdgeList out;
    out.num_vertices = static_cast<std::uint32_t>(n);
    out.edges.reserve(static_cast<std::size_t>(m));

    const double ab = probs[0] + probs[1];
    const double abc = ab + probs[2];
    for (std::uint64_t i = 0; i < m; ++i) {
        std::uint64_t u = 0, v = 0;
        for (std::uint32_t bit = 0; bit < scale; ++bit) {
            const double r = uniform_unit(rng);
            // quadrants: a=(0,0) b=(0,1) c=(1,0) d=(1,1)
            const std::uint64_t row = r >= ab ? 1 : 0;
            const std::uint64_t col = (r >= probs[0] && r < ab) || r >= abc ? 1 : 0;
            u = (u << 1) | row;
            v = (v << 1) | col;
        }
        out.edges.push_back({static_cast<VertexId>(u), static_cast<VertexId>(v)});
    }
    return out;
}

}  // namespace dgraph
