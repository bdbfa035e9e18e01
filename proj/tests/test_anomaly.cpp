#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "trafficuq/anomaly/bootstrap.hpp"
#include "trafficuq/anomaly/dependent_nulls.hpp"
#include "trafficuq/anomaly/fdr.hpp"
#include "trafficuq/anomaly/pvalues.hpp"
#include "trafficuq/anomaly/scorer.hpp"
#include "trafficuq/common/io.hpp"
#include "trafficuq/common/math.hpp"
#include "trafficuq/forecast/graph.hpp"

using namespace tuq;

namespace {

// Step-up oracle written independently of the library: scan every k and keep
// the largest one whose sorted p-value clears k * alpha / (m * c).
std::vector<bool> step_up_oracle(const std::vector<double>& p, double alpha, double c) {
    const std::size_t m = p.size();
    std::vector<double> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    std::size_t k_star = 0;
    for (std::size_t k = 1; k <= m; ++k) {
        if (sorted[k - 1] <= static_cast<double>(k) * alpha / (static_cast<double>(m) * c)) k_star = k;
    }
    std::vector<bool> mask(m, false);
    if (k_star == 0) return mask;
    const double cut = sorted[k_star - 1];
    for (std::size_t i = 0; i < m; ++i) mask[i] = p[i] <= cut;
    return mask;
}

}  // namespace

TEST_CASE("normalized residual examples") {
    std::vector<double> y{3.0, 4.0, 1.0}, mu{1.0, 4.0, 0.0}, sd{1.0, 2.0, 0.0};
    auto z = normalize_residuals(y, mu, sd);
    CHECK(z[0] == doctest::Approx(1.999998).epsilon(1e-9));
    CHECK(z[1] == 0.0);
    CHECK(z[2] == doctest::Approx(1e6));
}

TEST_CASE("gaussian scorer") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> g;
    std::vector<double> z(200000);
    for (auto& v : z) v = g(rng);
    auto s = fit_scorer(z, ScorerKind::GaussianNll);
    CHECK(s.score(0.0) == doctest::Approx(0.5 * std::log(2.0 * M_PI)).epsilon(0.01));
    double prev = s.score(s.mean());
    for (double d = 0.1; d < 6.0; d += 0.1) {
        const double up = s.score(s.mean() + d);
        const double down = s.score(s.mean() - d);
        CHECK(up > prev);
        CHECK(up == doctest::Approx(down).epsilon(1e-12));
        prev = up;
    }
    std::vector<double> small(10, 0.0);
    CHECK_THROWS_AS(fit_scorer(small, ScorerKind::GaussianNll), std::invalid_argument);
}

TEST_CASE("kernel density integrates to one") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    std::vector<double> z(5000);
    for (auto& v : z) v = g(rng) + (rng() % 3 == 0 ? 3.0 : 0.0);
    auto s = fit_scorer(z, ScorerKind::KernelDensity);
    CHECK(s.bandwidth() > 0.0);
    double integral = 0.0;
    const double h = 1e-3;
    for (double x = -15.0; x < 20.0; x += h) {
        integral += 0.5 * h * (std::exp(-s.score(x)) + std::exp(-s.score(x + h)));
    }
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(std::isfinite(s.score(1e6)));
    CHECK(s.score(50.0) > s.score(0.0));
    const std::string a = dump_json(s.to_json());
    CHECK(dump_json(ScoreProvider::from_json(Json::parse(a)).to_json()) == a);
    CHECK(ScoreProvider::from_json(Json::parse(a)).score(0.3) == s.score(0.3));
}

TEST_CASE("trimming examples") {
    std::vector<double> s;
    for (int i = 1; i <= 100; ++i) s.push_back(i);
    auto id = trim_calibration(s, 0.0);
    CHECK(id.size() == 100);
    auto t = trim_calibration(s, 0.02);
    CHECK(t.size() == 98);
    CHECK(t.retained.back() == 98.0);
    CHECK(t.threshold == 99.0);
    CHECK_THROWS_AS(trim_calibration(std::vector<double>{}, 0.02), std::invalid_argument);
}

TEST_CASE("property: trimmed size and threshold invariants") {
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> ex;
    std::uniform_int_distribution<int> n(1, 500);
    std::uniform_real_distribution<double> tau(0.0, 0.2);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> s(static_cast<std::size_t>(n(rng)));
        for (auto& v : s) v = ex(rng);
        const double t = tau(rng);
        auto c = trim_calibration(s, t);
        CHECK(c.size() == tolerant_ceil((1.0 - t) * static_cast<double>(s.size())));
        CHECK(c.retained.back() < c.threshold);
        CHECK(std::is_sorted(c.retained.begin(), c.retained.end()));
    }
}

TEST_CASE("conformal p-value examples") {
    std::vector<double> r{1, 2, 3, 4};
    auto c = trim_calibration(r, 0.0);
    CHECK(conformal_pvalue(c, 2.5) == doctest::Approx(0.6));
    CHECK(conformal_pvalue(c, 100.0) == doctest::Approx(0.2));
    CHECK(conformal_pvalue(c, -100.0) == 1.0);
    CHECK(conformal_pvalue(c, 3.0) == doctest::Approx(0.6));  // ties count as >=
}

TEST_CASE("property: p-values lie in range and ignore monotone transforms") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> cal(200), test(100);
        for (auto& v : cal) v = g(rng);
        for (auto& v : test) v = 1.5 * g(rng);
        auto c = trim_calibration(cal, 0.02);
        auto p = conformal_pvalues(c, test);
        auto f = [](double x) { return std::exp(2.0 * x) + x * x * x; };
        std::vector<double> cal2 = cal, test2 = test;
        for (auto& v : cal2) v = f(v);
        for (auto& v : test2) v = f(v);
        auto p2 = conformal_pvalues(trim_calibration(cal2, 0.02), test2);
        CHECK(p == p2);
        const double lo = 1.0 / (1.0 + static_cast<double>(c.size()));
        for (double v : p) {
            CHECK(v >= lo);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("BH examples") {
    std::vector<double> p{0.001, 0.02, 0.3, 0.9};
    auto r = bh_procedure(p, 0.05);
    CHECK(r.k_star == 2);
    CHECK(r.mask == std::vector<bool>{true, true, false, false});
    CHECK(bh_procedure(std::vector<double>(5, 1.0), 0.05).count() == 0);
    CHECK(bh_procedure(std::vector<double>(5, 0.0), 0.05).count() == 5);
}

TEST_CASE("BY examples") {
    std::vector<double> p{0.001, 0.02, 0.3, 0.9};
    auto r = by_procedure(p, 0.05);
    CHECK(r.c_m == doctest::Approx(25.0 / 12.0).epsilon(1e-14));
    CHECK(r.k_star == 1);
    CHECK(r.mask == std::vector<bool>{true, false, false, false});
    std::vector<double> big(293, 0.5);
    CHECK(by_procedure(big, 0.05).c_m == doctest::Approx(6.259).epsilon(1e-4));
}

TEST_CASE("property: BH and BY agree with the step-up oracle and BY is nested in BH") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u;
    std::uniform_int_distribution<int> m(1, 400);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<double> p(static_cast<std::size_t>(m(rng)));
        for (auto& v : p) v = u(rng) < 0.2 ? u(rng) * 1e-3 : u(rng);
        if (trial % 7 == 0) std::fill(p.begin(), p.begin() + static_cast<long>(p.size() / 2), 0.004);  // ties
        const double alpha = 0.01 + 0.2 * u(rng);
        auto bh = bh_procedure(p, alpha);
        auto by = by_procedure(p, alpha);
        CHECK(bh.mask == step_up_oracle(p, alpha, 1.0));
        CHECK(by.mask == step_up_oracle(p, alpha, harmonic_number(p.size())));
        for (std::size_t i = 0; i < p.size(); ++i) {
            if (by.mask[i]) CHECK(bh.mask[i]);
        }
        CHECK(by.count() <= bh.count());
    }
}

TEST_CASE("empirical FDR examples") {
    CHECK(empirical_fdr({false, false}, {true, false}).fdr == 0.0);
    auto half = empirical_fdr({true, true, false}, {true, false, false});
    CHECK(half.fdr == 0.5);
    CHECK(half.power == 1.0);
    auto all = empirical_fdr({true, false, true}, {true, false, true});
    CHECK(all.fdr == 0.0);
    CHECK(all.power == 1.0);
    CHECK(parse_fdr_procedure("by") == FdrProcedure::BY);
    CHECK_THROWS_AS(parse_fdr_procedure("holm"), std::invalid_argument);
}

TEST_CASE("block correlation oracle") {
    Panel same(40, 6);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u;
    for (std::size_t n = 0; n < 6; ++n) {
        const double v = u(rng);
        for (std::size_t t = 0; t < 40; ++t) same.at(t, n) = v;
    }
    CHECK(within_block_correlation(same, 10) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(uniform_corr_from_gaussian(1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(uniform_corr_from_gaussian(0.0) == 0.0);
    for (double target : {0.2, 0.34, 0.48}) {
        const double phi = phi_for_block_corr(target, 10);
        CHECK(block_corr_for_phi(phi, 10) == doctest::Approx(target).epsilon(1e-9));
    }
}

TEST_CASE("bootstrap: independent nulls give near-zero block correlation") {
    auto g = grid_topology(5, 6, 1.0);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u;
    Panel p(200, 30);
    for (auto& v : p.values) v = u(rng);
    BootstrapConfig cfg;
    cfg.seed = 1;
    auto rep = block_bootstrap_verify(p, std::nullopt, g, cfg);
    CHECK(rep.blocks.size() == 9);
    CHECK(rep.replicates == 1000);
    for (const auto& b : rep.blocks) {
        CHECK(std::abs(b.rho_block) < 0.05);
        CHECK(b.fdr_mean_by <= b.fdr_mean_bh + 1e-12);
    }
    auto again = block_bootstrap_verify(p, std::nullopt, g, cfg);
    CHECK(dump_json(again.to_json()) == dump_json(rep.to_json()));
    const std::string a = dump_json(rep.to_json());
    CHECK(dump_json(DependenceReport::from_json(Json::parse(a)).to_json()) == a);
}

TEST_CASE("bootstrap: identical rows give block correlation one") {
    auto g = grid_topology(3, 3, 1.0);
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u;
    Panel p(60, 9);
    std::vector<double> row(9);
    for (auto& v : row) v = u(rng);
    for (std::size_t t = 0; t < 60; ++t) std::copy(row.begin(), row.end(), p.row(t).begin());
    BootstrapConfig cfg;
    cfg.replicates = 100;
    cfg.space_hops = {1};
    auto rep = block_bootstrap_verify(p, std::nullopt, g, cfg);
    for (const auto& b : rep.blocks) CHECK(b.rho_block > 0.99);
}

TEST_CASE("bootstrap rejects tiny panels") {
    auto g = grid_topology(2, 2, 1.0);
    Panel p(10, 4, 0.5);
    BootstrapConfig cfg;
    CHECK_THROWS_AS(block_bootstrap_verify(p, std::nullopt, g, cfg), std::invalid_argument);
}

TEST_CASE("dependent null marginals are standard normal") {
    auto g = grid_topology(6, 6, 1.0);
    DependentNullConfig cfg;
    cfg.phi = 0.6;
    cfg.signal_fraction = 0.0;
    DependentNullGenerator gen(g, cfg);
    Rng rng = make_rng(9, "test");
    Panel scores;
    std::vector<bool> signal;
    double s1 = 0.0, s2 = 0.0, lag = 0.0;
    std::size_t n = 0, nl = 0;
    for (int rep = 0; rep < 40; ++rep) {
        gen.sample(100, rng, scores, signal);
        for (std::size_t t = 0; t < scores.steps; ++t) {
            for (std::size_t i = 0; i < scores.nodes; ++i) {
                s1 += scores.at(t, i);
                s2 += scores.at(t, i) * scores.at(t, i);
                ++n;
                if (t > 0) {
                    lag += scores.at(t, i) * scores.at(t - 1, i);
                    ++nl;
                }
            }
        }
    }
    CHECK(s1 / static_cast<double>(n) == doctest::Approx(0.0).epsilon(0.05));
    CHECK(std::abs(s1 / static_cast<double>(n)) < 0.05);
    CHECK(s2 / static_cast<double>(n) == doctest::Approx(1.0).epsilon(0.05));
    CHECK(lag / static_cast<double>(nl) == doctest::Approx(0.6).epsilon(0.05));
}
