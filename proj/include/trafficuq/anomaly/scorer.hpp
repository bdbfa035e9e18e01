#pragma once

#include <span>
#include <string>
#include <vector>

#include "trafficuq/common/io.hpp"

namespace tuq {

/// z = (y - mu) / (sigma + eps).
std::vector<double> normalize_residuals(std::span<const double> y, std::span<const double> mu,
                                        std::span<const double> sigma, double eps = 1e-6);

enum class ScorerKind { GaussianNll, KernelDensity };

ScorerKind parse_scorer_kind(const std::string& name);
std::string scorer_kind_name(ScorerKind k);

/// Negative log density of a normalized residual under a density fitted to
/// calibration residuals. Higher means more anomalous.
class ScoreProvider {
public:
    ScorerKind kind() const { return kind_; }
    double score(double z) const;
    std::vector<double> score(std::span<const double> z) const;

    double mean() const { return mean_; }
    double variance() const { return var_; }
    double bandwidth() const { return bandwidth_; }

    Json to_json() const;
    static ScoreProvider from_json(const Json& j);

    friend ScoreProvider fit_scorer(std::span<const double> sample, ScorerKind kind, std::size_t kde_max_points);

private:
    ScorerKind kind_ = ScorerKind::GaussianNll;
    double mean_ = 0.0;
    double var_ = 1.0;
    double bandwidth_ = 0.0;
    std::vector<double> support_;
};

inline constexpr std::size_t kMinScorerSample = 30;
inline constexpr double kGaussianVarianceFloor = 1e-12;

/// Gaussian: sample mean and variance (floored). Kernel: Gaussian kernels with
/// Silverman bandwidth 0.9 min(sd, IQR/1.34) n^(-1/5), on at most
/// kde_max_points evenly strided order statistics.
ScoreProvider fit_scorer(std::span<const double> sample, ScorerKind kind, std::size_t kde_max_points = 2000);

}  // namespace tuq
