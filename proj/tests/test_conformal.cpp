#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "trafficuq/common/io.hpp"
#include "trafficuq/conformal/calibration.hpp"
#include "trafficuq/conformal/clustering.hpp"

using namespace tuq;

namespace {

CalibrationLedger one_cluster_ledger(std::size_t nodes, std::vector<double> scores, double alpha = 0.1) {
    CalibrationLedger l;
    l.alpha = alpha;
    l.clusters.K = 1;
    l.clusters.labels.assign(nodes, 0);
    l.clusters.centroids = {{0.0, 0.0, 0.0}};
    std::sort(scores.begin(), scores.end());
    l.per_cluster = {ClusterCalibration{scores, alpha}};
    return l;
}

// Order-statistic oracle written from the definition: smallest s such that
// at least ceil((1-alpha)(n+1)) scores are <= s.
double oracle_quantile(std::vector<double> s, double alpha) {
    std::sort(s.begin(), s.end());
    const double need = (1.0 - alpha) * static_cast<double>(s.size() + 1);
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (static_cast<double>(i + 1) >= need - 1e-9) return s[i];
    }
    return INFINITY;
}

}  // namespace

TEST_CASE("conformity score examples") {
    std::vector<double> y{10.0, 4.0}, mu{7.0, 4.0}, sd{2.0, 1.0};
    auto r = conformity_scores(y, mu, sd);
    CHECK(r[0] == doctest::Approx(1.5));
    CHECK(r[1] == 0.0);
    std::vector<double> y3{30.0, 12.0}, mu3{21.0, 12.0}, sd3{6.0, 3.0};
    auto r3 = conformity_scores(y3, mu3, sd3);
    CHECK(r3[0] == doctest::Approx(r[0]).epsilon(1e-15));
    CHECK(r3[1] == r[1]);
}

TEST_CASE("cluster quantile examples") {
    std::vector<double> s;
    for (int i = 1; i <= 19; ++i) s.push_back(i);
    CHECK(cluster_quantile(s, 0.1) == 18.0);
    std::vector<double> one{3.0};
    CHECK(std::isinf(cluster_quantile(one, 0.1)));
    std::vector<double> flat(50, 2.5);
    for (double a : {0.05, 0.1, 0.3, 0.9}) CHECK(cluster_quantile(flat, a) == 2.5);
}

TEST_CASE("property: cluster quantile matches the counting oracle") {
    std::mt19937_64 rng(21);
    std::exponential_distribution<double> ex;
    std::uniform_int_distribution<int> size(1, 300);
    std::uniform_real_distribution<double> al(0.001, 0.5);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> s(static_cast<std::size_t>(size(rng)));
        for (auto& v : s) v = std::round(ex(rng) * 4.0) / 4.0;  // ties on purpose
        const double a = al(rng);
        const double q = cluster_quantile(s, a);
        const double o = oracle_quantile(s, a);
        if (std::isinf(o)) {
            CHECK(std::isinf(q));
        } else {
            CHECK(q == o);
        }
    }
}

TEST_CASE("interval examples") {
    ForecastBundle fb;
    fb.mu = Panel(1, 1, 5.0);
    fb.sigma = Panel(1, 1, 2.0);
    auto l = one_cluster_ledger(1, std::vector<double>(30, 1.5));
    auto iv = build_intervals(fb, l);
    CHECK(iv.lower.at(0, 0) == 2.0);
    CHECK(iv.upper.at(0, 0) == 8.0);
    CHECK_FALSE(iv.unbounded[0]);

    auto zero = one_cluster_ledger(1, std::vector<double>(30, 0.0));
    auto dz = build_intervals(fb, zero);
    CHECK(dz.lower.at(0, 0) == 5.0);
    CHECK(dz.upper.at(0, 0) == 5.0);

    auto tiny = one_cluster_ledger(1, {1.0});
    auto inf = build_intervals(fb, tiny);
    CHECK(inf.unbounded[0]);
    CHECK(std::isinf(inf.upper.at(0, 0)));
}

TEST_CASE("property: lower never exceeds upper") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g;
    ForecastBundle fb;
    fb.mu = Panel(50, 4);
    fb.sigma = Panel(50, 4);
    for (auto& v : fb.mu.values) v = 10 * g(rng);
    for (auto& v : fb.sigma.values) v = std::abs(g(rng));
    std::vector<double> s(100);
    for (auto& v : s) v = std::abs(g(rng));
    auto iv = build_intervals(fb, one_cluster_ledger(4, s));
    for (std::size_t i = 0; i < iv.lower.values.size(); ++i) CHECK(iv.lower.values[i] <= iv.upper.values[i]);
}

TEST_CASE("aci update examples") {
    CHECK(aci_update(0.1, 1.0, 0.0, 0.1) == 0.1);
    CHECK(aci_update(0.1, 1.0, 0.05, 0.1) == doctest::Approx(0.055));
    CHECK(aci_update(0.1, 0.0, 0.05, 0.1) == doctest::Approx(0.105));
    CHECK(aci_update(0.1, 1.0, 0.05, 0.1, AciSign::Appendix) == doctest::Approx(0.145));
    CHECK(aci_update(0.002, 1.0, 0.5, 0.1) == kAlphaMin);
    CHECK(aci_update(0.99, 0.0, 0.5, 0.1) == kAlphaMax);
    CalibrationLedger d;
    CHECK(d.gamma_aci == 0.05);
    CHECK(d.tau_gap == 24);
    CHECK(d.alpha == 0.1);
}

TEST_CASE("aci step moves only clusters with misses") {
    auto l = one_cluster_ledger(2, std::vector<double>(40, 1.0));
    l.clusters.K = 2;
    l.clusters.labels = {0, 1};
    l.clusters.centroids.push_back({0.0, 0.0, 0.0});
    l.per_cluster.push_back(l.per_cluster[0]);
    std::vector<double> y{0.0, 5.0}, lo{-1.0, -1.0}, hi{1.0, 1.0};
    aci_step(l, y, lo, hi);
    CHECK(l.per_cluster[0].alpha_t == doctest::Approx(0.105));
    CHECK(l.per_cluster[1].alpha_t == doctest::Approx(0.055));
}

TEST_CASE("coverage report examples") {
    CHECK(coverage_efficiency(0.914, 0.43) == doctest::Approx(2.13).epsilon(0.005));
    CHECK(coverage_efficiency(1.0, 0.5) == 2.0);
    CHECK_THROWS_AS(coverage_efficiency(0.5, 0.0), std::invalid_argument);

    PredictionIntervalSet iv;
    iv.lower = Panel(2, 2, 0.0);
    iv.upper = Panel(2, 2, 1.0);
    Panel truth(2, 2, 0.5);
    auto r = evaluate_coverage(iv, truth, 2.0);
    CHECK(r.coverage == 1.0);
    CHECK(r.riw == 0.5);
    CHECK(r.efficiency == 2.0);

    PredictionIntervalSet flat;
    flat.lower = Panel(2, 2, 0.0);
    flat.upper = Panel(2, 2, 0.0);
    CHECK_THROWS_AS(evaluate_coverage(flat, truth, 2.0), std::invalid_argument);
}

TEST_CASE("clustering examples") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 0.01);
    std::vector<ErrorStats> stats;
    for (int i = 0; i < 40; ++i) {
        const double base = i < 20 ? 1.0 : 10.0;
        stats.push_back({base + g(rng), base / 2 + g(rng), g(rng)});
    }
    auto one = cluster_nodes(stats, 1, 3);
    for (int l : one.labels) CHECK(l == 0);
    double m0 = 0.0;
    for (auto& s : stats) m0 += s[0];
    CHECK(one.centroids[0][0] == doctest::Approx(m0 / 40.0).epsilon(1e-12));

    auto two = cluster_nodes(stats, 2, 3);
    for (int i = 1; i < 20; ++i) CHECK(two.labels[i] == two.labels[0]);
    for (int i = 21; i < 40; ++i) CHECK(two.labels[i] == two.labels[20]);
    CHECK(two.labels[0] != two.labels[20]);
}

TEST_CASE("property: clusters are never empty and labels cover every node") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<ErrorStats> stats(40);
        for (auto& s : stats) s = {g(rng), std::abs(g(rng)), g(rng)};
        stats[3] = stats[4] = stats[5];  // duplicates
        const std::size_t K = 1 + static_cast<std::size_t>(trial % 15);
        auto c = cluster_nodes(stats, K, static_cast<std::uint64_t>(trial));
        CHECK(c.labels.size() == 40);
        for (auto sz : c.sizes()) CHECK(sz > 0);
        CHECK(c.K == K);
    }
}

TEST_CASE("node error stats use absolute residuals") {
    Panel r(4, 1);
    r.at(0, 0) = -1;
    r.at(1, 0) = 1;
    r.at(2, 0) = -3;
    r.at(3, 0) = 3;
    auto s = node_error_stats(r);
    CHECK(s[0][0] == 2.0);
    CHECK(s[0][1] == doctest::Approx(std::sqrt(4.0 / 3.0)));
    CHECK(s[0][2] == doctest::Approx(0.0));
}

TEST_CASE("ledger json round trip is byte identical") {
    auto l = one_cluster_ledger(3, {0.1, 0.25, 1.0 / 3.0, 2.0});
    l.per_cluster[0].alpha_t = 0.0731;
    const std::string a = dump_json(l.to_json());
    const std::string b = dump_json(CalibrationLedger::from_json(Json::parse(a)).to_json());
    CHECK(a == b);
}

TEST_CASE("shared ledger serializes writers against readers") {
    SharedLedger shared(one_cluster_ledger(1, std::vector<double>(20, 1.0)));
    std::thread writer([&] {
        for (int i = 0; i < 1000; ++i) {
            shared.write([](CalibrationLedger& l) { l.per_cluster[0].alpha_t = aci_update(l.per_cluster[0].alpha_t, 1.0, 0.01, 0.1); });
        }
    });
    for (int i = 0; i < 1000; ++i) {
        const double a = shared.read([](const CalibrationLedger& l) { return l.per_cluster[0].alpha_t; });
        CHECK(a >= kAlphaMin);
    }
    writer.join();
    CHECK(shared.read([](const CalibrationLedger& l) { return l.per_cluster[0].alpha_t; }) == kAlphaMin);
}
