#pragma once

#include <cstddef>

#include <Eigen/Dense>

#include "trafficuq/safety/constraints.hpp"
#include "trafficuq/safety/lyapunov.hpp"
#include "trafficuq/safety/world_model.hpp"

namespace tuq {

enum class ExpectationMode {
    EnsembleMean,  // L evaluated at the ensemble mean prediction
    MemberMean,    // mean of L over member predictions
};

struct SafetyFilterConfig {
    double kappa = 0.5;
    double delta_slack = 0.05;
    std::size_t n_proj = 20;
    double step = 0.05;
    double penalty = 10.0;
    double fd_relative = 1e-4;  // finite-difference step as a fraction of each action range
    ExpectationMode mode = ExpectationMode::EnsembleMean;
};

struct SafetyCheck {
    bool safe = false;
    double delta_L = 0.0;
    double bound = 0.0;  // -kappa d_C(s) + delta_slack
};

/// Safe iff L(next) - L(s) <= -kappa d_C(s) + delta_slack, next from the ensemble.
SafetyCheck check_lyapunov_safe(const Eigen::VectorXd& s, const Eigen::VectorXd& a, const WorldModelEnsemble& e,
                                const LyapunovParams& lyap, const LinearConstraints& constraints,
                                const SafetyFilterConfig& cfg);

struct ProjectionResult {
    Eigen::VectorXd action;
    SafetyCheck check;
    bool projected = false;
    std::size_t iterations = 0;
};

/// Returns a0 when it is already safe. Otherwise n_proj clipped gradient steps
/// on L(mu_W(s, a)) + penalty d_C(mu_W(s, a)) with central differences.
ProjectionResult project_safe_action(const Eigen::VectorXd& s, const Eigen::VectorXd& a0,
                                     const WorldModelEnsemble& e, const LyapunovParams& lyap,
                                     const LinearConstraints& constraints, const SafetyFilterConfig& cfg,
                                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper);

/// Same as project_safe_action but with the ensemble mean precomputed, for
/// repeated calls in a control loop.
class SafetyFilter {
public:
    SafetyFilter(const WorldModelEnsemble& e, LyapunovParams lyap, LinearConstraints constraints,
                 SafetyFilterConfig cfg, Eigen::VectorXd lower, Eigen::VectorXd upper);

    ProjectionResult apply(const Eigen::VectorXd& s, const Eigen::VectorXd& a0) const;
    SafetyCheck check(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;

    const SafetyFilterConfig& config() const { return cfg_; }
    const LyapunovParams& lyapunov() const { return lyap_; }
    const LinearConstraints& constraints() const { return constraints_; }
    /// For thresholds that move with time, such as a demand-relative baseline.
    void set_constraints(LinearConstraints c) { constraints_ = std::move(c); }

private:
    double expected_next_L(const Eigen::VectorXd& base, const Eigen::VectorXd& a,
                           const std::vector<Eigen::VectorXd>& member_base) const;

    const WorldModelEnsemble* ensemble_;
    LyapunovParams lyap_;
    LinearConstraints constraints_;
    SafetyFilterConfig cfg_;
    Eigen::VectorXd lower_;
    Eigen::VectorXd upper_;
    Eigen::MatrixXd mean_state_;
    Eigen::MatrixXd mean_action_;
    Eigen::VectorXd mean_bias_;
};

}  // namespace tuq
