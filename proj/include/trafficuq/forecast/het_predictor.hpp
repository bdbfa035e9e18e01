#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trafficuq/common/io.hpp"

namespace tuq {

/// Affine mean and affine log-sigma on standardized features:
///   mu      = y_mean + y_scale * (w . x' + b)
///   log_sig = v . x' + c,   sigma = exp(log_sig) + sigma_floor
/// where x' = (x - x_mean) / x_scale.
struct HetPredictor {
    Eigen::VectorXd x_mean;
    Eigen::VectorXd x_scale;
    double y_mean = 0.0;
    double y_scale = 1.0;
    Eigen::VectorXd w_mu;
    double b_mu = 0.0;
    Eigen::VectorXd w_log_sigma;
    double b_log_sigma = 0.0;
    double lambda_sigma = 0.0;
    double sigma_floor = 1e-4;

    std::size_t input_dim() const { return static_cast<std::size_t>(x_mean.size()); }
    std::pair<double, double> predict(std::span<const double> x) const;
    /// Rows of X are samples.
    std::pair<Eigen::VectorXd, Eigen::VectorXd> predict(const Eigen::MatrixXd& X) const;

    Json to_json() const;
    static HetPredictor from_json(const Json& j);
};

struct HetFitOptions {
    double lambda_sigma = 0.0;
    double step = 1e-2;
    std::size_t iterations = 2000;
    std::size_t min_samples = 10;
    std::size_t checkpoint_every = 100;
    double sigma_floor = 1e-4;
};

struct HetFitResult {
    HetPredictor model;
    std::vector<double> loss_trace;  // at iteration 0, every checkpoint, and the end
};

/// Loss: mean[(y-mu)^2 / (2 sigma^2) + log sigma] + lambda * mean[(log sigma)^2].
double het_loss(const HetPredictor& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Full-batch gradient descent from a least-squares warm start. A step that
/// would raise the loss is halved until it does not, so recorded losses never
/// increase. Throws std::runtime_error if the loss becomes non-finite.
HetFitResult fit_heteroscedastic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HetFitOptions& opt);

}  // namespace tuq
