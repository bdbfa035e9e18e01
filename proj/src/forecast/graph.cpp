#include "trafficuq/forecast/graph.hpp"

#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <string>

namespace tuq {

std::size_t GraphTopology::self_position(std::size_t i) const {
    const auto& nb = neighborhoods.at(i);
    for (std::size_t p = 0; p < nb.size(); ++p) {
        if (nb[p] == i) {
            return p;
        }
    }
    throw std::invalid_argument("node " + std::to_string(i) + " lacks a self-loop");
}

void GraphTopology::validate() const {
    const std::size_t n = neighborhoods.size();
    if (n == 0) {
        throw std::invalid_argument("graph has no nodes");
    }
    if (coords.size() != n || weights.size() != n) {
        throw std::invalid_argument("graph coords/weights size mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(coords[i][0]) || !std::isfinite(coords[i][1])) {
            throw std::invalid_argument("non-finite coordinate at node " + std::to_string(i));
        }
        if (weights[i].size() != neighborhoods[i].size()) {
            throw std::invalid_argument("weight row length mismatch at node " + std::to_string(i));
        }
        std::size_t self_count = 0;
        for (std::size_t p = 0; p < neighborhoods[i].size(); ++p) {
            const auto j = neighborhoods[i][p];
            if (j >= n) {
                throw std::invalid_argument("neighbor index out of range at node " + std::to_string(i));
            }
            if (!(weights[i][p] >= 0.0) || !std::isfinite(weights[i][p])) {
                throw std::invalid_argument("negative adjacency weight at node " + std::to_string(i));
            }
            self_count += (j == i);
        }
        if (self_count != 1) {
            throw std::invalid_argument("node " + std::to_string(i) + " must contain itself exactly once");
        }
    }
}

GraphTopology grid_topology(std::size_t rows, std::size_t cols, double spacing_km, std::size_t max_nodes) {
    if (rows == 0 || cols == 0) {
        throw std::invalid_argument("grid_topology: empty grid");
    }
    const std::size_t full = rows * cols;
    const std::size_t n = max_nodes == 0 ? full : std::min(full, max_nodes);
    GraphTopology g;
    g.coords.resize(n);
    g.neighborhoods.resize(n);
    g.weights.resize(n);
    for (std::size_t id = 0; id < n; ++id) {
        const std::size_t r = id / cols;
        const std::size_t c = id % cols;
        g.coords[id] = {static_cast<double>(c) * spacing_km, static_cast<double>(r) * spacing_km};
        auto& nb = g.neighborhoods[id];
        nb.push_back(id);
        if (r > 0) nb.push_back(id - cols);
        if (c > 0) nb.push_back(id - 1);
        if (c + 1 < cols && id + 1 < n) nb.push_back(id + 1);
        if (id + cols < n) nb.push_back(id + cols);
        g.weights[id].assign(nb.size(), 1.0);
    }
    return g;
}

std::vector<std::size_t> hop_distances(const GraphTopology& g, std::size_t source) {
    std::vector<std::size_t> dist(g.node_count(), std::numeric_limits<std::size_t>::max());
    std::deque<std::size_t> queue{source};
    dist.at(source) = 0;
    while (!queue.empty()) {
        const auto u = queue.front();
        queue.pop_front();
        for (auto v : g.neighborhoods[u]) {
            if (dist[v] == std::numeric_limits<std::size_t>::max()) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    return dist;
}

std::vector<std::size_t> hop_ball(const GraphTopology& g, std::size_t source, std::size_t hops) {
    const auto dist = hop_distances(g, source);
    std::vector<std::size_t> out;
    for (std::size_t v = 0; v < dist.size(); ++v) {
        if (dist[v] <= hops) {
            out.push_back(v);
        }
    }
    return out;
}

double euclidean_km(const GraphTopology& g, std::size_t i, std::size_t j) {
    return std::hypot(g.coords[i][0] - g.coords[j][0], g.coords[i][1] - g.coords[j][1]);
}

}  // namespace tuq
