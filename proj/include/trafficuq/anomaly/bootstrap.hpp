#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "trafficuq/common/io.hpp"
#include "trafficuq/common/panel.hpp"
#include "trafficuq/forecast/graph.hpp"

namespace tuq {

struct BootstrapConfig {
    std::vector<std::size_t> time_blocks{5, 10, 20};
    std::vector<std::size_t> space_hops{1, 2, 4};
    std::size_t replicates = 1000;
    double alpha = 0.05;
    std::size_t max_rows = 100;
    std::uint64_t seed = 0;
};

struct BlockReport {
    std::size_t time_block = 0;
    std::size_t space_hops = 0;
    double rho_block = 0.0;
    double fdr_mean_bh = 0.0;
    double fdr_q95_bh = 0.0;
    double fdr_mean_by = 0.0;
    double fdr_q95_by = 0.0;
    bool by_within_alpha = false;  // diagnostic only
};

struct DependenceReport {
    double alpha = 0.05;
    std::size_t replicates = 0;
    std::size_t rows_per_replicate = 0;
    std::vector<BlockReport> blocks;

    Json to_json() const;
    static DependenceReport from_json(const Json& j);
};

/// Within-block temporal p-value correlation: pooled Pearson correlation over
/// pairs (p[t][i], p[t'][i]), t != t', t and t' inside the same block of
/// consecutive rows of length block_len.
double within_block_correlation(const Panel& p, std::size_t block_len);

/// Moving-block resampling. Each replicate concatenates random contiguous
/// time blocks of length b_t and random b_s-hop node balls until it has
/// min(T, max_rows) rows and m columns; BH and BY run per row. When no truth
/// mask is given every rejection counts as false.
DependenceReport block_bootstrap_verify(const Panel& pvalues, const std::optional<Panel>& truth,
                                        const GraphTopology& g, const BootstrapConfig& cfg);

}  // namespace tuq
