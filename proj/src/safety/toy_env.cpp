#include "trafficuq/safety/toy_env.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "trafficuq/common/math.hpp"
#include "trafficuq/safety/spectral.hpp"

namespace tuq {

Eigen::VectorXd ToyLinearEnv::step(const Eigen::VectorXd& s, const Eigen::VectorXd& a, Rng& rng) const {
    std::normal_distribution<double> noise(0.0, cfg_.noise_sd);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd next = cfg_.A * s - a + cfg_.c;
    for (Eigen::Index k = 0; k < 2; ++k) next(k) += noise(rng);
    for (Eigen::Index k = 0; k < 2; ++k) {
        const bool burst = u(rng) < cfg_.burst_prob;
        const double size = cfg_.burst_lo + u(rng) * (cfg_.burst_hi - cfg_.burst_lo);
        if (burst) next(k) += size;
    }
    return next;
}

LinearConstraints ToyLinearEnv::constraints() const {
    return coordinate_upper_bounds({cfg_.thresholds(0), cfg_.thresholds(1)});
}

Eigen::VectorXd ToyLinearEnv::operating_point() const {
    const Eigen::Matrix2d M = Eigen::Matrix2d::Identity() - cfg_.A + Eigen::Matrix2d::Identity() / cfg_.gain;
    return M.partialPivLu().solve(cfg_.c);
}

ToySetup build_toy_setup(const ToyEnvConfig& cfg, std::uint64_t seed) {
    ToyLinearEnv env(cfg);
    auto rng = make_rng(seed, "toy/data");
    std::uniform_real_distribution<double> jitter(-cfg.train_jitter, cfg.train_jitter);
    std::vector<Transition> data;
    Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
    for (std::size_t t = 0; t < cfg.train_steps; ++t) {
        Eigen::VectorXd a = s / cfg.gain;
        for (Eigen::Index k = 0; k < 2; ++k) a(k) += jitter(rng);
        a = a.cwiseMax(0.0).cwiseMin(1.0);
        Eigen::VectorXd next = env.step(s, a, rng);
        data.push_back({s, a, next});
        s = next.norm() > cfg.domain_radius ? Eigen::VectorXd::Zero(2) : next;
    }
    const auto n_train = static_cast<std::size_t>(cfg.train_fraction * static_cast<double>(data.size()));
    std::vector<Transition> train(data.begin(), data.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::vector<Transition> holdout(data.begin() + static_cast<std::ptrdiff_t>(n_train), data.end());

    ToySetup setup{env, fit_world_ensemble(train, cfg.members, stream_seed(seed, "toy/ensemble")), {}, {}};
    setup.ensemble.eps_model = model_error(setup.ensemble, holdout, setup.ensemble.eps_floor);

    setup.lyapunov.s_safe = env.operating_point();
    Eigen::MatrixXd feature(1, 2);
    feature << 1.0, -1.0;
    setup.lyapunov.A = cfg.feature_scale * spectrally_normalize(feature);
    setup.lyapunov.eta = 1.0;
    setup.lyapunov.Q = Eigen::MatrixXd::Identity(2, 2);
    setup.lyapunov.validate();
    setup.bounds = lipschitz_bounds(setup.lyapunov, setup.ensemble, cfg.domain_radius);
    return setup;
}

ToyRollout run_toy_rollout(const ToySetup& setup, ToyPolicy policy, bool filter_on, std::size_t steps, Rng& rng,
                           std::size_t* projections) {
    const auto& cfg = setup.env.config();
    const Eigen::VectorXd lo = Eigen::VectorXd::Zero(2);
    const Eigen::VectorXd hi = Eigen::VectorXd::Ones(2);
    const auto constraints = setup.env.constraints();
    const SafetyFilter filter(setup.ensemble, setup.lyapunov, constraints, cfg.filter, lo, hi);
    const Policy pi = policy == ToyPolicy::Proportional ? proportional_policy(cfg.gain, 2) : random_policy(lo, hi);

    ToyRollout out;
    Eigen::VectorXd s = setup.lyapunov.s_safe;
    out.lyapunov.push_back(lyapunov_value(s, setup.lyapunov));
    double norm_acc = 0.0;
    for (std::size_t t = 0; t < steps; ++t) {
        Eigen::VectorXd a = pi(s, rng);
        if (filter_on) {
            const auto res = filter.apply(s, a);
            a = res.action;
            if (projections != nullptr && res.projected) ++*projections;
        }
        s = setup.env.step(s, a, rng);
        const double dc = constraints.violation(s);
        out.d_c.push_back(dc);
        out.violating_steps += dc > 0.0;
        out.lyapunov.push_back(lyapunov_value(s, setup.lyapunov));
        out.max_distance = std::max(out.max_distance, (s - setup.lyapunov.s_safe).norm());
        norm_acc += s.norm();
    }
    out.mean_state_norm = steps > 0 ? norm_acc / static_cast<double>(steps) : 0.0;
    return out;
}

ToyRunResult run_toy_experiment(const ToyEnvConfig& cfg, std::uint64_t seed, ToyPolicy policy, bool filter_on) {
    if (cfg.final_window == 0 || cfg.final_window > cfg.steps) {
        throw std::invalid_argument("run_toy_experiment: final window must lie in [1, steps]");
    }
    const auto setup = build_toy_setup(cfg, seed);
    ToyRunResult r;
    r.eps_model = setup.ensemble.eps_model;
    r.bounds = setup.bounds;
    r.bound = cfg.filter.delta_slack / cfg.filter.kappa;
    r.certificate = iterative_certificate(
        [&](std::size_t round) {
            auto rng = make_rng(seed, "toy/certify/" + std::to_string(round));
            const auto roll = run_toy_rollout(setup, policy, true, cfg.steps, rng);
            return RolloutStats{mean(roll.d_c), roll.mean_state_norm};
        },
        r.eps_model, setup.bounds.L_L, setup.bounds.J_W, cfg.filter.delta_slack, cfg.filter.kappa, cfg.max_rounds);
    auto rng = make_rng(seed, "toy/evaluate");
    r.rollout = run_toy_rollout(setup, policy, filter_on, cfg.steps, rng, &r.projections);
    r.rho_lyap = lyapunov_decrease_rate(r.rollout.lyapunov);
    const std::span<const double> tail(r.rollout.d_c.data() + (cfg.steps - cfg.final_window), cfg.final_window);
    r.final_mean_dc = mean(tail);
    return r;
}

}  // namespace tuq
