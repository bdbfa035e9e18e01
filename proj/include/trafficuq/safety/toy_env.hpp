#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "trafficuq/common/rng.hpp"
#include "trafficuq/safety/certificate.hpp"
#include "trafficuq/safety/constraints.hpp"
#include "trafficuq/safety/lyapunov.hpp"
#include "trafficuq/safety/policy.hpp"
#include "trafficuq/safety/safety_filter.hpp"
#include "trafficuq/safety/world_model.hpp"

namespace tuq {

/// Two coupled queues: s' = A s - a + c + w + bursts, actions in [0, 1]^2.
/// Bursts add U(burst_lo, burst_hi) to a coordinate with probability burst_prob.
struct ToyEnvConfig {
    Eigen::Matrix2d A = (Eigen::Matrix2d() << 0.95, 0.02, 0.02, 0.95).finished();
    Eigen::Vector2d c{0.55, 0.55};
    double noise_sd = 1e-5;
    double burst_prob = 0.03;
    double burst_lo = 1.5;
    double burst_hi = 2.5;
    Eigen::Vector2d thresholds{8.0, 8.0};
    double gain = 8.0;               // proportional policy a = clip(s / gain, 0, 1)
    std::size_t train_steps = 3000;
    double train_fraction = 0.8;
    double train_jitter = 0.3;       // data policy adds U(-j, j) to the proportional action
    double domain_radius = 8.0;
    std::size_t members = 5;
    double feature_scale = 0.3;      // spectral norm of the imbalance feature map
    std::size_t steps = 5000;
    std::size_t final_window = 1000;
    std::size_t max_rounds = 3;
    SafetyFilterConfig filter{20.0, 2.0, 20, 0.05, 10.0, 1e-4, ExpectationMode::EnsembleMean};
};

class ToyLinearEnv {
public:
    explicit ToyLinearEnv(ToyEnvConfig cfg) : cfg_(std::move(cfg)) {}

    Eigen::VectorXd step(const Eigen::VectorXd& s, const Eigen::VectorXd& a, Rng& rng) const;
    LinearConstraints constraints() const;
    /// Fixed point of the proportional policy: (I - A + I / gain) s = c.
    Eigen::VectorXd operating_point() const;
    const ToyEnvConfig& config() const { return cfg_; }

private:
    ToyEnvConfig cfg_;
};

struct ToyRollout {
    std::vector<double> lyapunov;  // length steps + 1
    std::vector<double> d_c;       // length steps
    std::size_t violating_steps = 0;
    double max_distance = 0.0;     // max ||s - s_safe||
    double mean_state_norm = 0.0;
};

struct ToyRunResult {
    double eps_model = 0.0;
    LipschitzBounds bounds;
    SafetyCertificate certificate;
    ToyRollout rollout;
    double rho_lyap = 0.0;
    double final_mean_dc = 0.0;
    double bound = 0.0;  // delta_slack / kappa
    std::size_t projections = 0;
};

enum class ToyPolicy { Proportional, Random };

struct ToySetup {
    ToyLinearEnv env;
    WorldModelEnsemble ensemble;
    LyapunovParams lyapunov;
    LipschitzBounds bounds;
};

/// Collects data with a jittered proportional policy, fits the ensemble on the
/// first train_fraction and measures eps_model on the rest.
ToySetup build_toy_setup(const ToyEnvConfig& cfg, std::uint64_t seed);

ToyRollout run_toy_rollout(const ToySetup& setup, ToyPolicy policy, bool filter_on, std::size_t steps, Rng& rng,
                           std::size_t* projections = nullptr);

/// Full certification and an evaluation rollout with the filter on.
ToyRunResult run_toy_experiment(const ToyEnvConfig& cfg, std::uint64_t seed, ToyPolicy policy = ToyPolicy::Proportional,
                                bool filter_on = true);

}  // namespace tuq
