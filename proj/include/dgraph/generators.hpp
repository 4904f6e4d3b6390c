#pragma once

#include <array>
#include <cstdint>

#include "dgraph/graph.hpp"

namespace dgraph {

/// Quadrant probabilities used by the recursive generator; GAP-conventional defaults.
inline constexpr std::array<double, 4> kDefaultKroneckerProbs = {0.57, 0.19, 0.19, 0.05};

/// Uniform random simple graph: N = 2^scale vertices and floor(avg_degree*N/2)
/// distinct undirected pairs, emitted once each (random orientation), so the
/// symmetrized CSR carries avg_degree*N directed entries. Deterministic per seed.
EdgeList generate_urand(std::uint32_t scale, std::uint32_t avg_degree, std::uint64_t seed);

/// Recursive-quadrant (R-MAT style) generator: N = 2^scale vertices and
/// edge_factor*N sampled edges, duplicates and self-loops included as drawn.
/// probs = (a,b,c,d) must sum to 1 within 1e-9. Deterministic per seed.
EdgeList generate_kronecker(std::uint32_t scale, std::uint32_t edge_factor, std::uint64_t seed,
                            std::array<double, 4> probs = kDefaultKroneckerProbs);

}  // namespace dgraph
