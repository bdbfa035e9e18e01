#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "trafficuq/common/io.hpp"
#include "trafficuq/safety/world_model.hpp"

namespace tuq {

/// L(s) = ||A s||^2 + eta (s - s_safe)^T Q (s - s_safe).
struct LyapunovParams {
    Eigen::MatrixXd A;  // spectrally normalized feature map, k x ds (k may be 0)
    double eta = 1.0;
    Eigen::MatrixXd Q;  // ds x ds, symmetric positive definite
    Eigen::VectorXd s_safe;

    void validate() const;

    Json to_json() const;
    static LyapunovParams from_json(const Json& j);
};

double lyapunov_value(const Eigen::VectorXd& s, const LyapunovParams& p);

struct LipschitzBounds {
    double L_L = 0.0;
    double J_W = 0.0;
    double feature_sup = 0.0;  // sup of ||A s|| over the domain
    double domain_radius = 0.0;
};

/// On the ball of radius R around s_safe:
///   L_L = 2 sup||A s|| sigma(A) + 2 eta sigma(Q) R, sup||A s|| <= ||A s_safe|| + sigma(A) R
///   J_W = max over members of sigma(state block).
LipschitzBounds lipschitz_bounds(const LyapunovParams& p, const WorldModelEnsemble& e, double domain_radius);

/// Fraction of steps with L(s_{t+1}) < L(s_t).
double lyapunov_decrease_rate(std::span<const double> values);

}  // namespace tuq
