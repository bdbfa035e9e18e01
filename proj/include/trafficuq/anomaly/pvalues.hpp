#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tuq {

struct TrimmedCalibration {
    std::vector<double> retained;  // sorted ascending
    double tau = 0.0;
    std::size_t original_size = 0;
    double threshold = 0.0;      // scores >= threshold were removed
    bool degenerate = false;     // ties at the threshold swallowed every score; all retained

    std::size_t size() const { return retained.size(); }
};

/// Drops scores at or above the (n'+1)-th smallest, n' = ceil((1 - tau) n).
TrimmedCalibration trim_calibration(std::span<const double> scores, double tau);

/// (1 + #{retained >= s}) / (1 + n').
double conformal_pvalue(const TrimmedCalibration& cal, double s);

std::vector<double> conformal_pvalues(const TrimmedCalibration& cal, std::span<const double> s);

}  // namespace tuq
