#pragma once

#include <span>
#include <vector>

namespace tuq {

struct PitResult {
    std::vector<double> pit;
    double ks = 0.0;
};

/// PIT_i = Phi((y_i - mu_i) / sigma_i) with the one-sample KS distance to U(0,1).
PitResult pit_values(std::span<const double> mu, std::span<const double> sigma, std::span<const double> y);

/// Asymptotic 99% critical value 1.63 / sqrt(n).
double ks_critical_99(std::size_t n);

struct ReliabilityCurve {
    std::vector<double> levels;
    std::vector<double> empirical;
    double calibration_error = 0.0;
};

/// Empirical coverage of central Gaussian intervals of each nominal mass.
ReliabilityCurve reliability_curve(std::span<const double> mu, std::span<const double> sigma,
                                   std::span<const double> y, std::span<const double> levels);

}  // namespace tuq
