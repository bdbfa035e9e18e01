#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace tuq {

struct GraphTopology {
    std::vector<std::array<double, 2>> coords;           // km
    std::vector<std::vector<std::size_t>> neighborhoods;  // self included exactly once
    std::vector<std::vector<double>> weights;             // parallel to neighborhoods

    std::size_t node_count() const { return neighborhoods.size(); }

    /// Position of node i inside its own neighborhood list.
    std::size_t self_position(std::size_t i) const;

    /// Throws std::invalid_argument when any invariant is broken.
    void validate() const;
};

/// Rook-adjacency grid with self-loops, filled row-major and truncated to
/// max_nodes (0 keeps the full rows x cols).
GraphTopology grid_topology(std::size_t rows, std::size_t cols, double spacing_km, std::size_t max_nodes = 0);

/// Hop distance from source to every node (SIZE_MAX when unreachable).
std::vector<std::size_t> hop_distances(const GraphTopology& g, std::size_t source);

/// Nodes within `hops` of source, ascending by index.
std::vector<std::size_t> hop_ball(const GraphTopology& g, std::size_t source, std::size_t hops);

double euclidean_km(const GraphTopology& g, std::size_t i, std::size_t j);

}  // namespace tuq
