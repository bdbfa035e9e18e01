#pragma once

#include <array>
#include <functional>
#include <string>

#include <Eigen/Dense>

#include "trafficuq/common/rng.hpp"

namespace tuq {

using Policy = std::function<Eigen::VectorXd(const Eigen::VectorXd& state, Rng& rng)>;

/// a = clip(s[k] / gain, 0, 1) for the first `dim` coordinates.
Policy proportional_policy(double gain, Eigen::Index dim);

/// Uniform on [lower, upper].
Policy random_policy(Eigen::VectorXd lower, Eigen::VectorXd upper);

struct ExplorationParams {
    std::array<double, 3> w{0.0, 0.0, 0.0};
    double b = 0.0;
    double beta = 0.1;  // scale of the additive-noise mode
};

enum class ExplorationMode { Sigmoid, GaussianNoise };

ExplorationMode parse_exploration_mode(const std::string& name);

/// sigmoid(w . [sigma_forecast, p_anom, sigma_W] + b).
double exploration_prob(double sigma_forecast, double p_anom, double sigma_world, const ExplorationParams& p);

/// a + N(0, (beta * sigma_forecast)^2) per coordinate, clipped to bounds.
Eigen::VectorXd exploration_noise(const Eigen::VectorXd& a, double sigma_forecast, const ExplorationParams& p,
                                  const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, Rng& rng);

struct RewardWeights {
    double lambda_p = 1.0;
    double lambda_sigma = 0.5;
    double lambda_c = 1.0;
};

/// r_traffic + lambda_p (p_after - p_before) - lambda_sigma sigma_bar - lambda_C d_C.
double anomaly_reward(double r_traffic, double p_before, double p_after, double sigma_bar, double d_c,
                      const RewardWeights& w);

}  // namespace tuq
