#pragma once

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "trafficuq/common/io.hpp"

namespace tuq {

struct Transition {
    Eigen::VectorXd s;
    Eigen::VectorXd a;
    Eigen::VectorXd s_next;
};

/// s' = W [s; a; 1], W is ds x (ds + da + 1).
struct AffineMember {
    Eigen::MatrixXd W;

    Eigen::VectorXd predict(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
    Eigen::MatrixXd state_block() const;
    Eigen::MatrixXd action_block() const;
};

inline constexpr double kRidgeFallback = 1e-3;

struct WorldModelEnsemble {
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::vector<AffineMember> members;
    std::vector<std::uint64_t> member_seeds;
    bool ridge_used = false;
    double eps_model = 0.0;
    double eps_floor = 0.1;

    /// Mean of the member matrices; its prediction equals the ensemble mean.
    Eigen::MatrixXd mean_matrix() const;

    Json to_json() const;
    static WorldModelEnsemble from_json(const Json& j);
};

/// Each member is a least-squares affine fit on an independent bootstrap
/// resample. A rank-deficient design switches that member to ridge with
/// lambda = kRidgeFallback times the mean squared design entry.
WorldModelEnsemble fit_world_ensemble(const std::vector<Transition>& data, std::size_t members, std::uint64_t seed);

/// Componentwise mean and population standard deviation across members.
std::pair<Eigen::VectorXd, Eigen::VectorXd> ensemble_predict(const WorldModelEnsemble& e, const Eigen::VectorXd& s,
                                                             const Eigen::VectorXd& a);

/// mean over holdout of ||s' - mu_W|| / (||s'|| + eps_floor).
double model_error(const WorldModelEnsemble& e, const std::vector<Transition>& holdout, double eps_floor = 0.1);

}  // namespace tuq
