#include "trafficuq/anomaly/pvalues.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "trafficuq/common/math.hpp"

namespace tuq {

TrimmedCalibration trim_calibration(std::span<const double> scores, double tau) {
    if (scores.empty()) {
        throw std::invalid_argument("trim_calibration: empty score set");
    }
    if (!(tau >= 0.0 && tau < 0.5)) {
        throw std::invalid_argument("trim_calibration: tau must lie in [0, 0.5)");
    }
    TrimmedCalibration out;
    out.tau = tau;
    out.original_size = scores.size();
    std::vector<double> sorted(scores.begin(), scores.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    const std::size_t keep = tolerant_ceil((1.0 - tau) * static_cast<double>(n));
    if (keep >= n) {
        out.threshold = std::numeric_limits<double>::infinity();
        out.retained = std::move(sorted);
        return out;
    }
    out.threshold = sorted[keep];
    const auto cut = std::lower_bound(sorted.begin(), sorted.end(), out.threshold);
    if (cut == sorted.begin()) {
        spdlog::warn("trim_calibration: every score ties at the trim threshold; retaining all {}", n);
        out.degenerate = true;
        out.retained = std::move(sorted);
        return out;
    }
    out.retained.assign(sorted.begin(), cut);
    return out;
}

double conformal_pvalue(const TrimmedCalibration& cal, double s) {
    if (cal.retained.empty()) {
        throw std::invalid_argument("conformal_pvalue: empty calibration set");
    }
    const auto first_ge = std::lower_bound(cal.retained.begin(), cal.retained.end(), s);
    const auto count = static_cast<double>(cal.retained.end() - first_ge);
    return (1.0 + count) / (1.0 + static_cast<double>(cal.retained.size()));
}

std::vector<double> conformal_pvalues(const TrimmedCalibration& cal, std::span<const double> s) {
    std::vector<double> out(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        out[i] = conformal_pvalue(cal, s[i]);
    }
    return out;
}

}  // namespace tuq
