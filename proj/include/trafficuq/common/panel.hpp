#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tuq {

/// Dense time x node matrix stored row-major (one row per time step).
struct Panel {
    std::size_t steps = 0;
    std::size_t nodes = 0;
    std::vector<double> values;

    Panel() = default;
    Panel(std::size_t t, std::size_t n, double fill = 0.0) : steps(t), nodes(n), values(t * n, fill) {}

    double& at(std::size_t t, std::size_t n) { return values[t * nodes + n]; }
    double at(std::size_t t, std::size_t n) const { return values[t * nodes + n]; }

    std::span<double> row(std::size_t t) { return {values.data() + t * nodes, nodes}; }
    std::span<const double> row(std::size_t t) const { return {values.data() + t * nodes, nodes}; }

    std::vector<double> column(std::size_t n) const;

    /// Rows [begin, end).
    Panel slice(std::size_t begin, std::size_t end) const;
};

}  // namespace tuq
