#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "trafficuq/common/io.hpp"
#include "trafficuq/common/rng.hpp"
#include "trafficuq/safety/certificate.hpp"
#include "trafficuq/safety/constraints.hpp"
#include "trafficuq/safety/lyapunov.hpp"
#include "trafficuq/safety/policy.hpp"
#include "trafficuq/safety/safety_filter.hpp"
#include "trafficuq/safety/spectral.hpp"
#include "trafficuq/safety/toy_env.hpp"
#include "trafficuq/safety/world_model.hpp"

using namespace tuq;

namespace {

WorldModelEnsemble single_member(const Eigen::MatrixXd& W, std::size_t ds, std::size_t da) {
    WorldModelEnsemble e;
    e.state_dim = ds;
    e.action_dim = da;
    e.members = {AffineMember{W}};
    return e;
}

LyapunovParams quadratic(std::size_t ds) {
    LyapunovParams p;
    p.A = Eigen::MatrixXd::Zero(0, static_cast<Eigen::Index>(ds));
    p.eta = 1.0;
    p.Q = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(ds), static_cast<Eigen::Index>(ds));
    p.s_safe = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ds));
    return p;
}

std::vector<Transition> linear_data(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::VectorXd& c,
                                    std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<Transition> out;
    for (std::size_t i = 0; i < n; ++i) {
        Transition t;
        t.s = Eigen::VectorXd(A.cols());
        t.a = Eigen::VectorXd(B.cols());
        for (auto& v : t.s) v = g(rng);
        for (auto& v : t.a) v = g(rng);
        t.s_next = A * t.s + B * t.a + c;
        out.push_back(t);
    }
    return out;
}

}  // namespace

TEST_CASE("constraint violation examples") {
    ConstraintSpec spec;
    CHECK(spec.d_queue == 50.0);
    CHECK(spec.d_wait == 120.0);
    CHECK(spec.d_through == 0.8);
    AggregateMetrics ok{10.0, 30.0, 1.0};
    CHECK(constraint_violation(ok, spec) == 0.0);
    AggregateMetrics q{55.0, 30.0, 1.0};
    CHECK(constraint_violation(q, spec) == 5.0);
    ConstraintSpec bad;
    bad.d_queue = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);

    auto lc = coordinate_upper_bounds({1.0, 2.0});
    CHECK(lc.violation(Eigen::Vector2d(0.5, 1.0)) == 0.0);
    CHECK(lc.violation(Eigen::Vector2d(1.5, 3.0)) == doctest::Approx(1.5));
    LinearConstraints floor;
    floor.rows.push_back({Eigen::Vector2d(1.0, 1.0), 2.0, -1.0, "floor"});
    CHECK(floor.violation(Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(1.0));
}

TEST_CASE("world ensemble recovers noiseless linear dynamics") {
    Eigen::MatrixXd A(2, 2), B(2, 1);
    A << 0.9, 0.1, -0.2, 0.8;
    B << 0.5, -1.0;
    Eigen::Vector2d c(0.3, -0.1);
    auto data = linear_data(A, B, c, 200, 1);
    auto e = fit_world_ensemble(data, 5, 7);
    CHECK(e.members.size() == 5);
    CHECK_FALSE(e.ridge_used);
    for (const auto& m : e.members) {
        CHECK((m.state_block() - A).norm() < 1e-9);
        CHECK((m.action_block() - B).norm() < 1e-9);
    }
    auto [mu, sd] = ensemble_predict(e, Eigen::Vector2d(1.0, 2.0), Eigen::VectorXd::Constant(1, 0.5));
    CHECK((mu - (A * Eigen::Vector2d(1.0, 2.0) + B * 0.5 + c)).norm() < 1e-9);
    CHECK(sd.maxCoeff() < 1e-9);
    CHECK(model_error(e, data) < 1e-9);

    auto again = fit_world_ensemble(data, 5, 7);
    CHECK(dump_json(again.to_json()) == dump_json(e.to_json()));
    const std::string js = dump_json(e.to_json());
    CHECK(dump_json(WorldModelEnsemble::from_json(Json::parse(js)).to_json()) == js);
}

TEST_CASE("world ensemble falls back to ridge on a repeated point") {
    Transition t{Eigen::Vector2d(1.0, 2.0), Eigen::VectorXd::Constant(1, 0.5), Eigen::Vector2d(3.0, 4.0)};
    std::vector<Transition> data(10, t);
    auto e = fit_world_ensemble(data, 3, 1);
    CHECK(e.ridge_used);
    auto [mu, sd] = ensemble_predict(e, t.s, t.a);
    CHECK(mu.allFinite());
}

TEST_CASE("ensemble prediction examples") {
    WorldModelEnsemble e;
    e.state_dim = 1;
    e.action_dim = 1;
    e.members = {AffineMember{Eigen::RowVector3d(0.0, 0.0, 0.0)}, AffineMember{Eigen::RowVector3d(0.0, 0.0, 2.0)}};
    auto [mu, sd] = ensemble_predict(e, Eigen::VectorXd::Constant(1, 5.0), Eigen::VectorXd::Constant(1, 1.0));
    CHECK(mu(0) == 1.0);
    CHECK(sd(0) * sd(0) == doctest::Approx(1.0));
    e.members[1] = e.members[0];
    CHECK(ensemble_predict(e, Eigen::VectorXd::Constant(1, 5.0), Eigen::VectorXd::Constant(1, 1.0)).second(0) == 0.0);
}

TEST_CASE("model error examples") {
    auto e = single_member((Eigen::MatrixXd(2, 4) << 0, 0, 0, 3, 0, 0, 0, 4.5).finished(), 2, 1);
    std::vector<Transition> h{{Eigen::Vector2d(0, 0), Eigen::VectorXd::Zero(1), Eigen::Vector2d(3, 4)}};
    CHECK(model_error(e, h) == doctest::Approx(0.5 / 5.1).epsilon(1e-12));
    CHECK(model_error(e, h, 1.0) < model_error(e, h, 0.1));
    auto perfect = single_member((Eigen::MatrixXd(2, 4) << 0, 0, 0, 3, 0, 0, 0, 4).finished(), 2, 1);
    CHECK(model_error(perfect, h) == 0.0);
}

TEST_CASE("spectral norm examples") {
    CHECK(spectral_norm(Eigen::MatrixXd::Identity(7, 7)) == doctest::Approx(1.0).epsilon(1e-12));
    Eigen::MatrixXd D = Eigen::Vector2d(2.0, 0.5).asDiagonal();
    CHECK(spectral_norm(D) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(spectral_norm(Eigen::MatrixXd::Zero(3, 4)) == 0.0);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int i = 0; i < 50; ++i) {
        Eigen::MatrixXd A(4, 5), B(5, 3);
        for (auto& v : A.reshaped()) v = g(rng);
        for (auto& v : B.reshaped()) v = g(rng);
        CHECK(spectral_norm(A * B) <= spectral_norm(A) * spectral_norm(B) * (1.0 + 1e-9));
        CHECK(spectral_norm(spectrally_normalize(A)) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("lipschitz bound examples") {
    auto e = single_member(Eigen::MatrixXd::Zero(2, 4), 2, 1);
    LyapunovParams flat = quadratic(2);
    flat.eta = 0.0;
    CHECK(lipschitz_bounds(flat, e, 3.0).L_L == 0.0);
    LyapunovParams q = quadratic(2);
    auto b = lipschitz_bounds(q, e, 3.0);
    CHECK(b.L_L == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(b.J_W == 0.0);
    CHECK_THROWS_AS(lipschitz_bounds(q, e, std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST_CASE("epsilon star examples") {
    CHECK(epsilon_star(0.1, 1.0, 0.4, 2.0, 1.0) == doctest::Approx(0.125).epsilon(1e-15));
    CHECK(epsilon_star(0.0, 1.0, 0.0, 2.0, 1.0) == 0.0);
    CHECK(epsilon_star(0.4783, 0.0, 0.0, 2.41, 1.23) == doctest::Approx(0.089).epsilon(0.005));
    CHECK_THROWS_AS(epsilon_star(0.1, 1.0, 0.4, 0.0, 1.0), std::invalid_argument);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 3.0);
    for (int i = 0; i < 200; ++i) {
        const double d = u(rng), k = u(rng), c = u(rng), l = u(rng), j = u(rng);
        CHECK(std::abs(epsilon_star(d, k, c, l, j) - (d + k * c) / (l * (1 + j))) <= 1e-12);
    }
}

TEST_CASE("lyapunov value examples") {
    LyapunovParams p = quadratic(2);
    CHECK(lyapunov_value(Eigen::Vector2d(0, 0), p) == 0.0);
    CHECK(lyapunov_value(Eigen::Vector2d(3, 4), p) == doctest::Approx(25.0));
    CHECK(lyapunov_value(Eigen::Vector2d(6, 8), p) == doctest::Approx(100.0));
    LyapunovParams bad = p;
    bad.Q(0, 0) = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    const std::string js = dump_json(p.to_json());
    CHECK(dump_json(LyapunovParams::from_json(Json::parse(js)).to_json()) == js);
}

TEST_CASE("property: lyapunov value is nonnegative and minimal at the safe point") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        LyapunovParams p;
        Eigen::MatrixXd M(4, 4);
        for (auto& v : M.reshaped()) v = g(rng);
        p.Q = M * M.transpose() + 0.1 * Eigen::MatrixXd::Identity(4, 4);
        p.s_safe = Eigen::Vector4d(g(rng), g(rng), g(rng), g(rng));
        Eigen::MatrixXd A(2, 4);
        for (auto& v : A.reshaped()) v = g(rng);
        // project rows so that A s_safe == 0
        for (Eigen::Index r = 0; r < 2; ++r) {
            A.row(r) -= (A.row(r).dot(p.s_safe) / p.s_safe.squaredNorm()) * p.s_safe.transpose();
        }
        p.A = spectrally_normalize(A);
        p.eta = 0.5;
        p.validate();
        const double at_safe = lyapunov_value(p.s_safe, p);
        CHECK(at_safe == doctest::Approx(0.0).epsilon(1e-12));
        for (int k = 0; k < 50; ++k) {
            Eigen::Vector4d s(g(rng), g(rng), g(rng), g(rng));
            CHECK(lyapunov_value(s, p) >= at_safe - 1e-12);
        }
    }
}

TEST_CASE("lyapunov safety check examples") {
    LyapunovParams p = quadratic(2);
    LinearConstraints none;
    SafetyFilterConfig cfg;
    cfg.delta_slack = 0.1;
    auto shrink = single_member((Eigen::MatrixXd(2, 4) << 0.5, 0, 0, 0, 0, 0.5, 0, 0).finished(), 2, 1);
    auto safe = check_lyapunov_safe(Eigen::Vector2d(1, 0), Eigen::VectorXd::Zero(1), shrink, p, none, cfg);
    CHECK(safe.safe);
    CHECK(safe.delta_L == doctest::Approx(-0.75));
    auto grow = single_member((Eigen::MatrixXd(2, 4) << 2, 0, 0, 0, 0, 2, 0, 0).finished(), 2, 1);
    auto unsafe = check_lyapunov_safe(Eigen::Vector2d(1, 0), Eigen::VectorXd::Zero(1), grow, p, none, cfg);
    CHECK_FALSE(unsafe.safe);
    CHECK(unsafe.delta_L == doctest::Approx(3.0));
    SafetyFilterConfig vacuous;
    vacuous.kappa = 0.0;
    vacuous.delta_slack = std::numeric_limits<double>::infinity();
    CHECK(check_lyapunov_safe(Eigen::Vector2d(1, 0), Eigen::VectorXd::Zero(1), grow, p, none, vacuous).safe);
}

TEST_CASE("projection examples") {
    auto e = single_member(Eigen::RowVector3d(1.0, 1.0, 0.0), 1, 1);
    LyapunovParams p = quadratic(1);
    LinearConstraints none;
    SafetyFilterConfig cfg;
    cfg.step = 0.25;
    cfg.n_proj = 40;
    Eigen::VectorXd lo = Eigen::VectorXd::Constant(1, -1.0), hi = Eigen::VectorXd::Constant(1, 1.0);
    Eigen::VectorXd s = Eigen::VectorXd::Constant(1, 1.0);
    auto r = project_safe_action(s, Eigen::VectorXd::Constant(1, 0.5), e, p, none, cfg, lo, hi);
    CHECK(r.projected);
    CHECK(r.action(0) == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(r.check.safe);

    auto early = project_safe_action(s, Eigen::VectorXd::Constant(1, -0.9), e, p, none, cfg, lo, hi);
    CHECK_FALSE(early.projected);
    CHECK(early.action(0) == -0.9);

    SafetyFilterConfig none_iter = cfg;
    none_iter.n_proj = 0;
    auto clipped = project_safe_action(s, Eigen::VectorXd::Constant(1, 3.0), e, p, none, none_iter, lo, hi);
    CHECK(clipped.action(0) == 1.0);
    CHECK(clipped.iterations == 0);
}

TEST_CASE("exploration and reward examples") {
    ExplorationParams zero;
    CHECK(exploration_prob(3.0, 0.2, 1.0, zero) == 0.5);
    ExplorationParams w1;
    w1.w = {1.0, 0.0, 0.0};
    CHECK(exploration_prob(2.0, 0.7, 9.0, w1) == doctest::Approx(0.8807970779778823).epsilon(1e-14));
    ExplorationParams w3;
    w3.w = {0.2, -0.5, 0.8};
    w3.b = -1.0;
    double prev = 0.0;
    for (double sw = 0.0; sw < 10.0; sw += 0.25) {
        const double e = exploration_prob(1.0, 0.3, sw, w3);
        CHECK(e >= prev);
        CHECK(e > 0.0);
        CHECK(e < 1.0);
        prev = e;
    }
    Rng rng = make_rng(1, "t");
    Eigen::VectorXd a = Eigen::VectorXd::Constant(3, 0.5);
    auto noisy = exploration_noise(a, 1.0, w3, Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3), rng);
    CHECK(noisy.minCoeff() >= 0.0);
    CHECK(noisy.maxCoeff() <= 1.0);
    CHECK(parse_exploration_mode("sigmoid") == ExplorationMode::Sigmoid);

    RewardWeights none{0.0, 0.0, 0.0};
    CHECK(anomaly_reward(-4.2, 0.1, 0.9, 3.0, 2.0, none) == -4.2);
    RewardWeights w{1.0, 0.5, 1.0};
    CHECK(anomaly_reward(10.0, 0.2, 0.5, 2.0, 0.0, w) == doctest::Approx(9.3));
    CHECK(anomaly_reward(0.0, 0.2, 0.6, 1.0, 0.0, w) > anomaly_reward(0.0, 0.2, 0.4, 1.0, 0.0, w));
}

TEST_CASE("certificate: perfect model passes in the first round") {
    int calls = 0;
    auto rollout = [&](std::size_t) {
        ++calls;
        return RolloutStats{0.2, 1.0};
    };
    auto c = iterative_certificate(rollout, 0.0, 2.0, 1.0, 0.05, 0.5);
    CHECK(c.verdict == Verdict::Pass);
    CHECK(c.history.front().verdict == Verdict::Pass);
    CHECK(c.history.front().dbar_c == 1.0);
    CHECK(c.history.front().eps_star == doctest::Approx((0.05 + 0.5) / 4.0));
    CHECK(c.eps_star == epsilon_star(c.delta_slack, c.kappa, c.dbar_c, c.L_L, c.J_W));
    CHECK(c.eps_star_floor == epsilon_star(0.05, 0.5, 0.0, 2.0, 1.0));
    CHECK(c.history.size() <= 3);
    CHECK(calls >= 1);
}

TEST_CASE("certificate: flipping verdicts end undetermined after max rounds") {
    // eps(dbar = 1) = 0.1375, eps(dbar = 0) = 0.0125; the model error sits between.
    auto rollout = [](std::size_t r) { return RolloutStats{r % 2 == 1 ? 0.0 : 1.0, 1.0}; };
    auto c = iterative_certificate(rollout, 0.05, 2.0, 1.0, 0.05, 0.5, 3);
    CHECK(c.verdict == Verdict::Undetermined);
    CHECK(c.history.size() == 3);
    CHECK(c.history[0].verdict == Verdict::Pass);
    CHECK(c.history[1].verdict == Verdict::Fail);
    const std::string js = dump_json(c.to_json());
    CHECK(dump_json(SafetyCertificate::from_json(Json::parse(js)).to_json()) == js);
    CHECK(parse_verdict(verdict_name(Verdict::Undetermined)) == Verdict::Undetermined);
}

TEST_CASE("certificate at a fixed operating point passes") {
    auto rollout = [](std::size_t) { return RolloutStats{1.0, 1.0}; };
    // numerator 0.4783 at L_L = 2.41 and J_W = 1.23 gives 0.089
    auto c = iterative_certificate(rollout, 0.074, 2.41, 1.23, 0.05, 0.4283, 3, 1.0);
    CHECK(c.eps_star == doctest::Approx(0.089).epsilon(0.005));
    CHECK(c.verdict == Verdict::Pass);
}

TEST_CASE("lyapunov decrease rate examples") {
    CHECK(lyapunov_decrease_rate(std::vector<double>{5, 4, 3, 2}) == 1.0);
    CHECK(lyapunov_decrease_rate(std::vector<double>{2, 2, 2}) == 0.0);
    CHECK(lyapunov_decrease_rate(std::vector<double>{2, 1, 2, 1, 2}) == 0.5);
}

TEST_CASE("property: the filter never adds violating steps on the toy system") {
    ToyEnvConfig cfg;
    cfg.steps = 1500;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        auto setup = build_toy_setup(cfg, seed);
        Rng r1 = make_rng(seed, "toy/eval");
        Rng r2 = make_rng(seed, "toy/eval");
        auto on = run_toy_rollout(setup, ToyPolicy::Random, true, cfg.steps, r1);
        auto off = run_toy_rollout(setup, ToyPolicy::Random, false, cfg.steps, r2);
        CHECK(on.violating_steps <= off.violating_steps);
    }
}

TEST_CASE("property: toy proportional policy settles at its operating point") {
    ToyEnvConfig cfg;
    cfg.burst_prob = 0.0;
    ToyLinearEnv env(cfg);
    Rng rng = make_rng(1, "toy");
    Eigen::VectorXd s = Eigen::Vector2d(5.0, 1.0);
    for (int t = 0; t < 2000; ++t) {
        Eigen::VectorXd a = (s / cfg.gain).cwiseMax(0.0).cwiseMin(1.0);
        s = env.step(s, a, rng);
    }
    CHECK((s - env.operating_point()).norm() < 1e-3);
}
