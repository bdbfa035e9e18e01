#include "trafficuq/forecast/dual_stream.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <stdexcept>

#include "trafficuq/common/math.hpp"

namespace tuq {

std::vector<double> DualStreamParams::weights() const {
    const std::size_t width = 2 * half_width + 1;
    if (window_logits.empty()) {
        return std::vector<double>(width, 1.0 / static_cast<double>(width));
    }
    if (window_logits.size() != width) {
        throw std::invalid_argument("window logits must have length 2w+1");
    }
    return softmax(window_logits);
}

double DualStreamParams::rho() const {
    // tanh saturates to exactly +-1 in double precision past |x| ~ 19
    constexpr double edge = 1.0 - 1e-12;
    return std::clamp(std::tanh(correlation_raw), -edge, edge);
}

DualStream decompose_dual_stream(std::span<const double> series, const DualStreamParams& p) {
    const std::size_t n = series.size();
    const std::size_t w = p.half_width;
    if (n < 2 * w + 1) {
        throw std::invalid_argument("series of length " + std::to_string(n) + " is shorter than the window 2w+1 = " +
                                    std::to_string(2 * w + 1));
    }
    const auto alpha = p.weights();
    const auto last = static_cast<std::ptrdiff_t>(n) - 1;
    auto reflect = [last](std::ptrdiff_t idx) {
        if (idx < 0) return -idx;
        if (idx > last) return 2 * last - idx;
        return idx;
    };
    DualStream out;
    out.trend.resize(n);
    out.residual.resize(n);
    for (std::size_t t = 0; t < n; ++t) {
        double acc = 0.0;
        for (std::size_t k = 0; k < alpha.size(); ++k) {
            const auto offset = static_cast<std::ptrdiff_t>(k) - static_cast<std::ptrdiff_t>(w);
            acc += alpha[k] * series[static_cast<std::size_t>(reflect(static_cast<std::ptrdiff_t>(t) + offset))];
        }
        out.trend[t] = acc;
        out.residual[t] = series[t] - acc;
    }
    return out;
}

std::pair<Panel, Panel> decompose_panel(const Panel& panel, const DualStreamParams& p) {
    Panel trend(panel.steps, panel.nodes);
    Panel residual(panel.steps, panel.nodes);
    for (std::size_t n = 0; n < panel.nodes; ++n) {
        const auto col = panel.column(n);
        const auto ds = decompose_dual_stream(col, p);
        for (std::size_t t = 0; t < panel.steps; ++t) {
            trend.at(t, n) = ds.trend[t];
            residual.at(t, n) = ds.residual[t];
        }
    }
    return {std::move(trend), std::move(residual)};
}

double combine_uncertainty(double sigma_trend, double sigma_res, double rho) {
    if (!(sigma_trend > 0.0) || !(sigma_res > 0.0) || !std::isfinite(sigma_trend) || !std::isfinite(sigma_res)) {
        throw std::invalid_argument("combine_uncertainty: sigmas must be positive and finite");
    }
    if (!(rho > -1.0 && rho < 1.0)) {
        throw std::invalid_argument("combine_uncertainty: rho must lie in (-1, 1)");
    }
    const double var = sigma_trend * sigma_trend + sigma_res * sigma_res + 2.0 * rho * sigma_trend * sigma_res;
    return std::sqrt(std::max(var, 0.0));
}

}  // namespace tuq
