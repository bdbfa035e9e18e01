#include "trafficuq/safety/policy.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "trafficuq/common/math.hpp"

namespace tuq {

Policy proportional_policy(double gain, Eigen::Index dim) {
    if (!(gain > 0.0)) {
        throw std::invalid_argument("proportional_policy: gain must be positive");
    }
    return [gain, dim](const Eigen::VectorXd& s, Rng&) {
        return Eigen::VectorXd((s.head(dim) / gain).cwiseMax(0.0).cwiseMin(1.0));
    };
}

Policy random_policy(Eigen::VectorXd lower, Eigen::VectorXd upper) {
    if (lower.size() != upper.size()) {
        throw std::invalid_argument("random_policy: bound size mismatch");
    }
    return [lower = std::move(lower), upper = std::move(upper)](const Eigen::VectorXd&, Rng& rng) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Eigen::VectorXd a(lower.size());
        for (Eigen::Index k = 0; k < a.size(); ++k) a(k) = lower(k) + u(rng) * (upper(k) - lower(k));
        return a;
    };
}

ExplorationMode parse_exploration_mode(const std::string& name) {
    if (name == "sigmoid") return ExplorationMode::Sigmoid;
    if (name == "gaussian") return ExplorationMode::GaussianNoise;
    throw std::invalid_argument("unknown exploration mode: " + name);
}

double exploration_prob(double sigma_forecast, double p_anom, double sigma_world, const ExplorationParams& p) {
    return sigmoid(p.w[0] * sigma_forecast + p.w[1] * p_anom + p.w[2] * sigma_world + p.b);
}

Eigen::VectorXd exploration_noise(const Eigen::VectorXd& a, double sigma_forecast, const ExplorationParams& p,
                                  const Eigen::VectorXd& lower, const Eigen::VectorXd& upper, Rng& rng) {
    std::normal_distribution<double> gauss(0.0, std::max(p.beta * sigma_forecast, 0.0));
    Eigen::VectorXd out = a;
    for (Eigen::Index k = 0; k < out.size(); ++k) out(k) += p.beta * sigma_forecast > 0.0 ? gauss(rng) : 0.0;
    return out.cwiseMax(lower).cwiseMin(upper);
}

double anomaly_reward(double r_traffic, double p_before, double p_after, double sigma_bar, double d_c,
                      const RewardWeights& w) {
    if (w.lambda_p < 0.0 || w.lambda_sigma < 0.0 || w.lambda_c < 0.0) {
        throw std::invalid_argument("anomaly_reward: weights must be nonnegative");
    }
    return r_traffic + w.lambda_p * (p_after - p_before) - w.lambda_sigma * sigma_bar - w.lambda_c * d_c;
}

}  // namespace tuq
