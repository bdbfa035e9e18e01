#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace tuq {

inline double softplus(double x) noexcept {
    // log(1 + e^x) without overflow for large x
    return x > 30.0 ? x : std::log1p(std::exp(x));
}

inline double sigmoid(double x) noexcept {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double leaky_relu(double x, double slope) noexcept { return x >= 0.0 ? x : slope * x; }

/// Standard normal CDF.
double normal_cdf(double z);

/// Standard normal quantile; p must lie in (0, 1).
double normal_quantile(double p);

/// Numerically stable softmax of a row of logits.
std::vector<double> softmax(std::span<const double> logits);

/// H_m = sum_{i=1}^m 1/i, summed smallest-term first.
double harmonic_number(std::size_t m);

/// ceil(x) that tolerates values sitting a few ulps above an integer,
/// e.g. 0.9 * 20 evaluating to 18.000000000000004.
std::size_t tolerant_ceil(double x);

double mean(std::span<const double> x);

/// Sample standard deviation with n-1 normalization; 0 for fewer than 2 values.
double sample_stddev(std::span<const double> x);

/// Moment skewness; defined as 0 when the sample has no spread.
double skewness(std::span<const double> x);

/// Linear-interpolated empirical quantile of an unsorted sample.
double empirical_quantile(std::vector<double> x, double q);

}  // namespace tuq
