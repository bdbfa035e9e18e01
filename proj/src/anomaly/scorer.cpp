#include "trafficuq/anomaly/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "trafficuq/common/math.hpp"

namespace tuq {

std::vector<double> normalize_residuals(std::span<const double> y, std::span<const double> mu,
                                        std::span<const double> sigma, double eps) {
    if (y.size() != mu.size() || y.size() != sigma.size()) {
        throw std::invalid_argument("normalize_residuals: length mismatch");
    }
    std::vector<double> z(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (sigma[i] < 0.0) {
            throw std::invalid_argument("normalize_residuals: sigma must be nonnegative");
        }
        z[i] = (y[i] - mu[i]) / (sigma[i] + eps);
    }
    return z;
}

ScorerKind parse_scorer_kind(const std::string& name) {
    if (name == "gaussian_nll") return ScorerKind::GaussianNll;
    if (name == "kernel_density") return ScorerKind::KernelDensity;
    throw std::invalid_argument("unknown scorer kind: " + name);
}

std::string scorer_kind_name(ScorerKind k) {
    return k == ScorerKind::GaussianNll ? "gaussian_nll" : "kernel_density";
}

double ScoreProvider::score(double z) const {
    if (kind_ == ScorerKind::GaussianNll) {
        const double d = z - mean_;
        return 0.5 * std::log(2.0 * std::numbers::pi * var_) + d * d / (2.0 * var_);
    }
    // log-sum-exp keeps far-tail scores finite
    double peak = -INFINITY;
    for (double s : support_) {
        const double u = (z - s) / bandwidth_;
        peak = std::max(peak, -0.5 * u * u);
    }
    double acc = 0.0;
    for (double s : support_) {
        const double u = (z - s) / bandwidth_;
        acc += std::exp(-0.5 * u * u - peak);
    }
    const double log_density = peak + std::log(acc) -
                               std::log(static_cast<double>(support_.size()) * bandwidth_ *
                                        std::sqrt(2.0 * std::numbers::pi));
    return -log_density;
}

std::vector<double> ScoreProvider::score(std::span<const double> z) const {
    std::vector<double> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = score(z[i]);
    }
    return out;
}

Json ScoreProvider::to_json() const {
    Json j;
    j["kind"] = scorer_kind_name(kind_);
    j["mean"] = mean_;
    j["variance"] = var_;
    j["bandwidth"] = bandwidth_;
    j["support"] = support_;
    return j;
}

ScoreProvider ScoreProvider::from_json(const Json& j) {
    ScoreProvider s;
    s.kind_ = parse_scorer_kind(j.at("kind").get<std::string>());
    s.mean_ = j.at("mean").get<double>();
    s.var_ = j.at("variance").get<double>();
    s.bandwidth_ = j.at("bandwidth").get<double>();
    s.support_ = j.at("support").get<std::vector<double>>();
    if (s.kind_ == ScorerKind::KernelDensity && (s.support_.empty() || !(s.bandwidth_ > 0.0))) {
        throw std::invalid_argument("kernel scorer JSON needs support points and a positive bandwidth");
    }
    return s;
}

ScoreProvider fit_scorer(std::span<const double> sample, ScorerKind kind, std::size_t kde_max_points) {
    if (sample.size() < kMinScorerSample) {
        throw std::invalid_argument("fit_scorer: need at least 30 calibration residuals");
    }
    for (double v : sample) {
        if (!std::isfinite(v)) {
            throw std::invalid_argument("fit_scorer: sample must be finite");
        }
    }
    ScoreProvider s;
    s.kind_ = kind;
    s.mean_ = mean(sample);
    const double sd = sample_stddev(sample);
    s.var_ = std::max(sd * sd, kGaussianVarianceFloor);
    if (kind == ScorerKind::GaussianNll) {
        return s;
    }
    if (!(sd > 0.0)) {
        throw std::invalid_argument("fit_scorer: kernel density needs a sample with spread");
    }
    std::vector<double> sorted(sample.begin(), sample.end());
    std::sort(sorted.begin(), sorted.end());
    const double iqr = empirical_quantile(sorted, 0.75) - empirical_quantile(sorted, 0.25);
    const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
    s.bandwidth_ = 0.9 * spread * std::pow(static_cast<double>(sorted.size()), -0.2);
    const std::size_t keep = std::min(sorted.size(), std::max<std::size_t>(kde_max_points, 1));
    s.support_.resize(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        s.support_[i] = sorted[i * sorted.size() / keep];
    }
    return s;
}

}  // namespace tuq
