#include "trafficuq/common/math.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>

namespace tuq {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw std::invalid_argument("normal_quantile: p must lie in (0, 1)");
    }
    static const boost::math::normal_distribution<double> standard{0.0, 1.0};
    return boost::math::quantile(standard, p);
}

std::vector<double> softmax(std::span<const double> logits) {
    if (logits.empty()) {
        throw std::invalid_argument("softmax: empty row");
    }
    const double peak = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] - peak);
        total += out[k];
    }
    for (double& v : out) {
        v /= total;
    }
    return out;
}

double harmonic_number(std::size_t m) {
    double sum = 0.0;
    for (std::size_t i = m; i >= 1; --i) {
        sum += 1.0 / static_cast<double>(i);
    }
    return sum;
}

std::size_t tolerant_ceil(double x) {
    if (x <= 0.0) {
        return 0;
    }
    const double nearest = std::round(x);
    if (std::abs(x - nearest) <= 1e-9 * std::max(1.0, std::abs(x))) {
        return static_cast<std::size_t>(nearest);
    }
    return static_cast<std::size_t>(std::ceil(x));
}

double mean(std::span<const double> x) {
    if (x.empty()) {
        return 0.0;
    }
    return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double sample_stddev(std::span<const double> x) {
    if (x.size() < 2) {
        return 0.0;
    }
    const double m = mean(x);
    double ss = 0.0;
    for (double v : x) {
        ss += (v - m) * (v - m);
    }
    return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double skewness(std::span<const double> x) {
    if (x.size() < 2) {
        return 0.0;
    }
    const double m = mean(x);
    double m2 = 0.0;
    double m3 = 0.0;
    for (double v : x) {
        const double d = v - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(x.size());
    m3 /= static_cast<double>(x.size());
    if (m2 <= 1e-300) {
        return 0.0;
    }
    return m3 / std::pow(m2, 1.5);
}

double empirical_quantile(std::vector<double> x, double q) {
    if (x.empty()) {
        throw std::invalid_argument("empirical_quantile: empty sample");
    }
    std::sort(x.begin(), x.end());
    const double pos = q * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, x.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return x[lo] + frac * (x[hi] - x[lo]);
}

}  // namespace tuq
