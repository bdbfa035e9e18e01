#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "trafficuq/common/panel.hpp"

namespace tuq {

struct DualStreamParams {
    std::size_t half_width = 1;
    std::vector<double> window_logits;  // length 2w+1; empty means uniform
    double correlation_raw = 0.0;

    /// Softmax of window_logits.
    std::vector<double> weights() const;
    /// tanh(correlation_raw).
    double rho() const;
};

struct DualStream {
    std::vector<double> trend;
    std::vector<double> residual;
};

/// Moving weighted average with reflect padding at both ends.
DualStream decompose_dual_stream(std::span<const double> series, const DualStreamParams& p);

/// Applies decompose_dual_stream to every node column.
std::pair<Panel, Panel> decompose_panel(const Panel& panel, const DualStreamParams& p);

/// sqrt(st^2 + sr^2 + 2 rho st sr).
double combine_uncertainty(double sigma_trend, double sigma_res, double rho);

}  // namespace tuq
