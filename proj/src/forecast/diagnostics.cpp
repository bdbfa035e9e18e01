#include "trafficuq/forecast/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trafficuq/common/math.hpp"

namespace tuq {

namespace {

void check_shapes(std::span<const double> mu, std::span<const double> sigma, std::span<const double> y) {
    if (mu.size() != sigma.size() || mu.size() != y.size() || mu.empty()) {
        throw std::invalid_argument("diagnostics: mu, sigma, y must be nonempty and equal length");
    }
    for (double s : sigma) {
        if (!(s > 0.0)) {
            throw std::invalid_argument("diagnostics: sigma must be positive");
        }
    }
}

}  // namespace

PitResult pit_values(std::span<const double> mu, std::span<const double> sigma, std::span<const double> y) {
    check_shapes(mu, sigma, y);
    PitResult r;
    r.pit.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        r.pit[i] = normal_cdf((y[i] - mu[i]) / sigma[i]);
    }
    auto sorted = r.pit;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        const double u = sorted[i];
        d = std::max({d, static_cast<double>(i + 1) / n - u, u - static_cast<double>(i) / n});
    }
    r.ks = d;
    return r;
}

double ks_critical_99(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }

ReliabilityCurve reliability_curve(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> y, std::span<const double> levels) {
    check_shapes(mu, sigma, y);
    ReliabilityCurve c;
    c.levels.assign(levels.begin(), levels.end());
    double err = 0.0;
    for (double q : levels) {
        if (!(q > 0.0 && q < 1.0)) {
            throw std::invalid_argument("reliability_curve: levels must lie in (0, 1)");
        }
        const double z = normal_quantile(0.5 + q / 2.0);
        std::size_t inside = 0;
        for (std::size_t i = 0; i < y.size(); ++i) {
            inside += std::abs(y[i] - mu[i]) <= z * sigma[i];
        }
        const double emp = static_cast<double>(inside) / static_cast<double>(y.size());
        c.empirical.push_back(emp);
        err += std::abs(emp - q);
    }
    c.calibration_error = levels.empty() ? 0.0 : err / static_cast<double>(levels.size());
    return c;
}

}  // namespace tuq
