#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "trafficuq/common/panel.hpp"

namespace tuq {

using ErrorStats = std::array<double, 3>;  // mean, std, skew

struct ClusterAssignment {
    std::size_t K = 0;
    std::vector<int> labels;
    std::vector<ErrorStats> centroids;

    std::vector<std::size_t> sizes() const;
};

/// (mean, std, skew) of |residual| per node column.
std::vector<ErrorStats> node_error_stats(const Panel& residuals);

/// k-means++ seeding then Lloyd iterations on column-standardized statistics.
/// Empty clusters are refilled from the largest cluster. Centroids are
/// reported in the original units.
ClusterAssignment cluster_nodes(const std::vector<ErrorStats>& stats, std::size_t K, std::uint64_t seed,
                                std::size_t max_iter = 100);

}  // namespace tuq
