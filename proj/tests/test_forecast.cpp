#include <doctest.h>

#include <cfloat>
#include <cmath>
#include <random>

#include "trafficuq/common/io.hpp"
#include "trafficuq/common/math.hpp"
#include "trafficuq/forecast/attention.hpp"
#include "trafficuq/forecast/diagnostics.hpp"
#include "trafficuq/forecast/dual_stream.hpp"
#include "trafficuq/forecast/forecaster.hpp"
#include "trafficuq/forecast/graph.hpp"
#include "trafficuq/forecast/het_predictor.hpp"

using namespace tuq;

namespace {

AttentionParams scalar_params(double gamma_raw = 0.0) {
    AttentionParams p;
    p.W = Eigen::MatrixXd::Ones(1, 1);
    p.a = Eigen::Vector2d(1.0, 1.0);
    p.gamma_raw = gamma_raw;
    return p;
}

// Raw gamma that makes softplus(raw) == g.
double raw_for_gamma(double g) { return std::log(std::expm1(g)); }

}  // namespace

TEST_CASE("grid topology invariants") {
    auto g = grid_topology(3, 4, 1.0);
    CHECK(g.node_count() == 12);
    g.validate();
    CHECK(g.neighborhoods[0].size() == 3);  // self, right, down
    CHECK(g.neighborhoods[5].size() == 5);
    CHECK(g.neighborhoods[g.self_position(5)].size() > 0);
    CHECK(g.neighborhoods[5][g.self_position(5)] == 5);
    CHECK(hop_distances(g, 0)[11] == 5);
    CHECK(hop_ball(g, 0, 1) == std::vector<std::size_t>{0, 1, 4});
    CHECK(euclidean_km(g, 0, 5) == doctest::Approx(std::sqrt(2.0)));
    auto t = grid_topology(17, 18, 0.25, 293);
    CHECK(t.node_count() == 293);
    t.validate();

    GraphTopology bad = grid_topology(2, 2, 1.0);
    bad.neighborhoods[1].push_back(1);
    bad.weights[1].push_back(1.0);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("dual stream examples") {
    DualStreamParams p;
    p.half_width = 1;
    std::vector<double> c(9, 5.0);
    p.window_logits = {0.3, -1.0, 2.0};
    auto d = decompose_dual_stream(c, p);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(d.trend[i] == doctest::Approx(5.0).epsilon(1e-14));
        CHECK(d.residual[i] == doctest::Approx(0.0).epsilon(1e-14));
    }
    p.window_logits.clear();
    auto a = decompose_dual_stream(std::vector<double>{1, 2, 3}, p);
    CHECK(a.trend[1] == doctest::Approx(2.0));
    CHECK(a.residual[1] == doctest::Approx(0.0).epsilon(1e-14));
    auto b = decompose_dual_stream(std::vector<double>{1, 2, 9}, p);
    CHECK(b.trend[1] == doctest::Approx(4.0));
    CHECK(b.residual[1] == doctest::Approx(-2.0));
}

TEST_CASE("dual stream reconstruction is exact") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        DualStreamParams p;
        p.half_width = 1 + static_cast<std::size_t>(trial % 4);
        p.window_logits.resize(2 * p.half_width + 1);
        for (double& v : p.window_logits) v = g(rng);
        std::vector<double> s(40);
        for (double& v : s) v = 10.0 * g(rng);
        auto d = decompose_dual_stream(s, p);
        for (std::size_t i = 0; i < s.size(); ++i) {
            const double scale = std::max(std::abs(s[i]), std::abs(d.trend[i]));
            CHECK(std::abs(d.trend[i] + d.residual[i] - s[i]) <= 2.0 * DBL_EPSILON * scale);
        }
        double wsum = 0.0;
        for (double w : p.weights()) {
            CHECK(w > 0.0);
            wsum += w;
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("combine uncertainty examples and bounds") {
    CHECK(combine_uncertainty(3, 4, 0) == doctest::Approx(5.0));
    CHECK(combine_uncertainty(3, 4, 1.0 - 1e-12) == doctest::Approx(7.0).epsilon(1e-9));
    CHECK(combine_uncertainty(3, 4, -1.0 + 1e-12) == doctest::Approx(1.0).epsilon(1e-6));
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 10.0), r(-0.999, 0.999);
    for (int i = 0; i < 1000; ++i) {
        const double st = u(rng), sr = u(rng), rho = r(rng);
        const double tot = combine_uncertainty(st, sr, rho);
        CHECK(tot >= std::abs(st - sr) - 1e-12);
        CHECK(tot <= st + sr + 1e-12);
    }
    DualStreamParams p;
    p.correlation_raw = 50.0;
    CHECK(p.rho() < 1.0);
}

TEST_CASE("attention logit examples") {
    AttentionParams p = scalar_params();
    Eigen::VectorXd hi(1), hj(1);
    hi << 1.0;
    hj << 2.0;
    CHECK(attention_logit(hi, hj, p) == doctest::Approx(3.0));
    hi << -2.0;
    hj << 1.0;
    CHECK(attention_logit(hi, hj, p) == doctest::Approx(-0.2));
    p.W = Eigen::MatrixXd::Zero(1, 1);
    CHECK(attention_logit(hi, hj, p) == 0.0);
}

TEST_CASE("pugat attention examples") {
    AttentionParams p = scalar_params();
    CHECK(p.gamma() == doctest::Approx(0.6931).epsilon(1e-4));

    std::vector<double> e(4, 0.7), s(4, 1.3);
    auto uni = pugat_attention(e, s, 2, p);
    for (double v : uni) CHECK(v == doctest::Approx(0.25).epsilon(1e-14));

    p.gamma_raw = raw_for_gamma(1.0);
    CHECK(p.gamma() == doctest::Approx(1.0).epsilon(1e-14));
    std::vector<double> e3{0.0, 0.0, 0.0}, s3{0.8, 0.5, 1.0};
    auto row = pugat_attention(e3, s3, 0, p);
    CHECK(row[1] / row[2] == doctest::Approx(1.6487212707).epsilon(1e-9));

    std::vector<double> bad{1.0, 0.0};
    CHECK_THROWS_AS(pugat_attention(e3, bad, 0, p), std::invalid_argument);
}

TEST_CASE("temperature-scaled attention examples") {
    std::vector<double> e{0.3, -1.2, 2.0};
    auto plain = softmax(e);
    auto t0 = temp_scaled_attention(e, 3.0, 0.0);
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(t0[i] == plain[i]);
    std::vector<double> e2{0.0, std::log(4.0)};
    auto t = temp_scaled_attention(e2, 1.0, 1.0);
    CHECK(t[1] / t[0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("closed-form ratio examples") {
    CHECK(attention_ratio_closed_form(0.4, 0.4, 1.7, 0.9, 0.9) == 1.0);
    CHECK(attention_ratio_closed_form(1.0, 0.0, 0.0, 0.3, 2.0) == doctest::Approx(2.718281828).epsilon(1e-9));
    CHECK(attention_ratio_closed_form(0.0, 0.0, 2.0, 0.5, 0.8) == doctest::Approx(1.8221188).epsilon(1e-7));
}

TEST_CASE("property: pugat ratios follow the closed form and its monotonicity") {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> g;
    std::uniform_real_distribution<double> pos(0.05, 3.0);
    std::uniform_int_distribution<int> deg(3, 8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = static_cast<std::size_t>(deg(rng));
        AttentionParams p = scalar_params(g(rng));
        p.self_loop_bias = g(rng);
        std::vector<double> e(n), s(n);
        for (auto& v : e) v = g(rng);
        for (auto& v : s) v = pos(rng);
        const std::size_t self = static_cast<std::size_t>(trial) % n;
        const std::size_t j = (self + 1) % n, k = (self + 2) % n;
        auto row = pugat_attention(e, s, self, p);
        double sum = 0.0;
        for (double v : row) {
            CHECK(v > 0.0);
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        const double cf = attention_ratio_closed_form(e[j], e[k], p.gamma(), s[j], s[k]);
        CHECK(std::abs(row[j] / row[k] - cf) <= 1e-12 * cf);

        const double h = 1e-3;
        auto s_k = s;
        s_k[k] += h;
        auto row_k = pugat_attention(e, s_k, self, p);
        CHECK(row_k[j] / row_k[k] > row[j] / row[k]);
        auto s_j = s;
        s_j[j] += h;
        auto row_j = pugat_attention(e, s_j, self, p);
        CHECK(row_j[j] / row_j[k] < row[j] / row[k]);
        auto s_i = s;
        s_i[self] += h;
        auto row_i = pugat_attention(e, s_i, self, p);
        CHECK(row_i[j] / row_i[k] == doctest::Approx(row[j] / row[k]).epsilon(1e-12));
    }
}

TEST_CASE("property: temperature-scaled rows ignore neighbor uncertainty") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> e(5), sig(5);
        for (auto& v : e) v = g(rng);
        for (auto& v : sig) v = 0.1 + std::abs(g(rng));
        const std::size_t self = static_cast<std::size_t>(trial) % 5;
        auto a = temp_scaled_attention(e, sig[self], 0.7);
        for (std::size_t j = 0; j < 5; ++j) {
            if (j != self) sig[j] = 0.1 + 10.0 * std::abs(g(rng));
        }
        auto b = temp_scaled_attention(e, sig[self], 0.7);
        CHECK(a == b);
    }
}

TEST_CASE("layer forward examples") {
    GraphTopology single;
    single.coords = {{0.0, 0.0}};
    single.neighborhoods = {{0}};
    single.weights = {{1.0}};
    LayerParams lp;
    lp.attention.W = (Eigen::MatrixXd(2, 2) << 1.0, 0.5, -0.3, 2.0).finished();
    lp.attention.a = Eigen::VectorXd::Constant(4, 0.4);
    lp.w_sigma = Eigen::VectorXd::Zero(2);
    Eigen::MatrixXd h(1, 2);
    h << 0.2, -0.7;
    std::vector<double> sig{0.9};
    auto out = layer_forward(h, sig, single, lp);
    const Eigen::VectorXd wh = lp.attention.W * h.row(0).transpose();
    CHECK(out.features(0, 0) == doctest::Approx(std::tanh(wh(0))).epsilon(1e-14));
    CHECK(out.features(0, 1) == doctest::Approx(std::tanh(wh(1))).epsilon(1e-14));
    CHECK(out.sigma[0] == doctest::Approx(0.6931471805599453).epsilon(1e-14));
}

TEST_CASE("layer forward is local to connected components") {
    GraphTopology g;
    g.coords = {{0, 0}, {1, 0}, {5, 0}, {6, 0}};
    g.neighborhoods = {{0, 1}, {0, 1}, {2, 3}, {2, 3}};
    g.weights = {{1, 1}, {1, 1}, {1, 1}, {1, 1}};
    LayerParams lp;
    lp.attention.W = Eigen::MatrixXd::Identity(2, 2);
    lp.attention.a = (Eigen::VectorXd(4) << 0.3, -0.2, 0.5, 0.1).finished();
    lp.attention.gamma_raw = 0.4;
    lp.w_sigma = Eigen::Vector2d(0.2, -0.4);
    Eigen::MatrixXd h(4, 2);
    h << 1, 2, 3, 4, 5, 6, 7, 8;
    std::vector<double> s{0.5, 1.0, 1.5, 2.0};
    auto base = layer_forward(h, s, g, lp);
    h.row(3) << -9, 12;
    s[2] = 7.0;
    auto pert = layer_forward(h, s, g, lp);
    CHECK(pert.features.row(0) == base.features.row(0));
    CHECK(pert.features.row(1) == base.features.row(1));
    CHECK(pert.sigma[0] == base.sigma[0]);
    CHECK(pert.sigma[1] == base.sigma[1]);
    for (double v : pert.sigma) CHECK(v > 0.0);
}

TEST_CASE("heteroscedastic fit recovers slope and noise") {
    std::mt19937_64 rng(42);
    std::normal_distribution<double> g;
    const int n = 5000;
    Eigen::MatrixXd X(n, 1);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
        X(i, 0) = g(rng);
        y(i) = 2.0 * X(i, 0) + 0.5 * g(rng);
    }
    HetFitOptions opt;
    auto fit = fit_heteroscedastic(X, y, opt);
    std::vector<double> x0{0.0}, x1{1.0};
    const double slope = fit.model.predict(x1).first - fit.model.predict(x0).first;
    CHECK(slope == doctest::Approx(2.0).epsilon(0.05));
    CHECK(std::abs(slope - 2.0) <= 0.1);
    const double sig = fit.model.predict(x0).second;
    CHECK(sig >= 0.4);
    CHECK(sig <= 0.6);
    for (std::size_t i = 1; i < fit.loss_trace.size(); ++i) CHECK(fit.loss_trace[i] <= fit.loss_trace[i - 1]);
}

TEST_CASE("heteroscedastic fit: strong regularizer pins sigma to one, floor guards zero variance") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    Eigen::MatrixXd X(400, 1);
    Eigen::VectorXd y(400);
    for (int i = 0; i < 400; ++i) {
        X(i, 0) = g(rng);
        y(i) = X(i, 0) + 3.0 * g(rng);
    }
    HetFitOptions opt;
    opt.lambda_sigma = 1e6;
    auto reg = fit_heteroscedastic(X, y, opt);
    std::vector<double> x0{0.3};
    CHECK(reg.model.predict(x0).second == doctest::Approx(1.0).epsilon(0.02));

    Eigen::VectorXd flat = Eigen::VectorXd::Constant(400, 2.0);
    HetFitOptions zero;
    auto deg = fit_heteroscedastic(X, flat, zero);
    const double s = deg.model.predict(x0).second;
    CHECK(s >= 1e-4);
    CHECK(std::isfinite(s));
    CHECK(deg.loss_trace.back() < deg.loss_trace.front());
}

TEST_CASE("het predictor json round trip") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    Eigen::MatrixXd X(100, 2);
    Eigen::VectorXd y(100);
    for (int i = 0; i < 100; ++i) {
        X(i, 0) = g(rng);
        X(i, 1) = g(rng);
        y(i) = X(i, 0) - X(i, 1) + g(rng);
    }
    HetFitOptions opt;
    opt.iterations = 50;
    auto m = fit_heteroscedastic(X, y, opt).model;
    const std::string a = dump_json(m.to_json());
    CHECK(dump_json(HetPredictor::from_json(Json::parse(a)).to_json()) == a);
}

TEST_CASE("PIT examples") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    const std::size_t n = 10000;
    std::vector<double> mu(n), sd(n), y(n), sd2(n);
    for (std::size_t i = 0; i < n; ++i) {
        mu[i] = 3.0 * g(rng);
        sd[i] = 0.5 + std::abs(g(rng));
        y[i] = mu[i] + sd[i] * g(rng);
        sd2[i] = 2.0 * sd[i];
    }
    CHECK(pit_values(mu, sd, y).ks < ks_critical_99(n));
    CHECK(pit_values(mu, sd2, y).ks > ks_critical_99(n));
    auto exact = pit_values(mu, sd, mu);
    for (double v : exact.pit) CHECK(v == 0.5);
    CHECK(exact.ks == doctest::Approx(0.5));
}

TEST_CASE("property: calibrated PIT passes KS at 99% on 20 seeds") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> g;
        const std::size_t n = 2000;
        std::vector<double> mu(n), sd(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            mu[i] = g(rng);
            sd[i] = 1.0 + 0.5 * std::abs(g(rng));
            y[i] = mu[i] + sd[i] * g(rng);
        }
        CHECK(pit_values(mu, sd, y).ks < ks_critical_99(n));
    }
}

TEST_CASE("reliability curve examples") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    const std::size_t n = 100000;
    std::vector<double> mu(n, 0.0), sd(n, 1.0), half(n, 0.5), y(n);
    for (auto& v : y) v = g(rng);
    std::vector<double> levels{0.1, 0.3, 0.5, 0.7, 0.9, 0.95};
    CHECK(reliability_curve(mu, sd, y, levels).calibration_error < 0.01);
    auto under = reliability_curve(mu, half, y, levels);
    for (std::size_t i = 0; i < levels.size(); ++i) CHECK(under.empirical[i] < levels[i]);
    std::vector<double> two{0.5, 0.9};
    auto exact = reliability_curve(mu, sd, mu, two);
    CHECK(exact.empirical == std::vector<double>{1.0, 1.0});
}

TEST_CASE("forecaster fits a seasonal panel and round-trips through json") {
    const std::size_t T = 600, N = 9;
    auto g = grid_topology(3, 3, 1.0);
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0.0, 0.5);
    Panel y(T, N);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t n = 0; n < N; ++n) {
            y.at(t, n) = 20.0 + 5.0 * std::sin(2.0 * M_PI * static_cast<double>(t) / 96.0) +
                         static_cast<double>(n) + noise(rng);
        }
    }
    ForecasterConfig cfg;
    cfg.fit.iterations = 300;
    Forecaster f(cfg);
    CHECK(f.min_history() == 96);
    f.fit(y, g, 400);
    auto fb = f.predict(y, 400, 600);
    double se = 0.0;
    for (std::size_t t = 0; t < 200; ++t) {
        for (std::size_t n = 0; n < N; ++n) {
            const double r = y.at(400 + t, n) - fb.mu.at(t, n);
            se += r * r;
            CHECK(fb.sigma.at(t, n) > 0.0);
        }
    }
    CHECK(std::sqrt(se / (200.0 * N)) < 1.0);
    CHECK_THROWS(f.predict(y, 10, 20));

    const std::string a = dump_json(f.to_json());
    Forecaster back = Forecaster::from_json(Json::parse(a), g);
    CHECK(dump_json(back.to_json()) == a);
    auto fb2 = back.predict(y, 400, 600);
    CHECK(fb2.mu.values == fb.mu.values);
}
