#include "trafficuq/conformal/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "trafficuq/common/math.hpp"

namespace tuq {

std::vector<double> conformity_scores(std::span<const double> y, std::span<const double> mu,
                                      std::span<const double> sigma) {
    if (y.size() != mu.size() || y.size() != sigma.size()) {
        throw std::invalid_argument("conformity_scores: length mismatch");
    }
    std::vector<double> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (!(sigma[i] > 0.0)) {
            throw std::invalid_argument("conformity_scores: sigma must be positive");
        }
        out[i] = std::abs(y[i] - mu[i]) / sigma[i];
    }
    return out;
}

double cluster_quantile(std::span<const double> scores, double alpha) {
    if (scores.empty()) {
        throw std::invalid_argument("cluster_quantile: empty score set");
    }
    const std::size_t n = scores.size();
    const std::size_t k = std::max<std::size_t>(1, tolerant_ceil((1.0 - alpha) * static_cast<double>(n + 1)));
    if (k > n) {
        return kInfiniteQuantile;
    }
    if (std::is_sorted(scores.begin(), scores.end())) {
        return scores[k - 1];
    }
    std::vector<double> tmp(scores.begin(), scores.end());
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(k - 1), tmp.end());
    return tmp[k - 1];
}

double aci_update(double alpha_t, double err, double gamma, double target, AciSign sign) {
    const double delta = sign == AciSign::Standard ? target - err : err - target;
    return std::clamp(alpha_t + gamma * delta, kAlphaMin, kAlphaMax);
}

double CalibrationLedger::quantile_for_node(std::size_t node) const {
    if (node >= clusters.labels.size()) {
        throw std::invalid_argument("ledger has no cluster for node " + std::to_string(node));
    }
    const auto c = static_cast<std::size_t>(clusters.labels[node]);
    if (c >= per_cluster.size()) {
        throw std::invalid_argument("ledger is missing cluster " + std::to_string(c));
    }
    return per_cluster[c].quantile();
}

CalibrationLedger calibrate_ledger(const ForecastBundle& cal, const Panel& y_cal, const ClusterAssignment& clusters,
                                   double alpha, double gamma_aci, std::size_t tau_gap) {
    if (y_cal.steps != cal.mu.steps || y_cal.nodes != cal.mu.nodes || clusters.labels.size() != y_cal.nodes) {
        throw std::invalid_argument("calibrate_ledger: shape mismatch");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) {
        throw std::invalid_argument("calibrate_ledger: alpha must lie in (0, 1)");
    }
    CalibrationLedger L;
    L.alpha = alpha;
    L.gamma_aci = gamma_aci;
    L.tau_gap = tau_gap;
    L.clusters = clusters;
    L.per_cluster.assign(clusters.K, ClusterCalibration{{}, alpha});
    for (std::size_t t = 0; t < y_cal.steps; ++t) {
        const auto s = conformity_scores(y_cal.row(t), cal.mu.row(t), cal.sigma.row(t));
        for (std::size_t n = 0; n < s.size(); ++n) {
            L.per_cluster[static_cast<std::size_t>(clusters.labels[n])].scores.push_back(s[n]);
        }
    }
    for (auto& pc : L.per_cluster) {
        if (pc.scores.empty()) {
            throw std::invalid_argument("calibrate_ledger: a cluster received no calibration scores");
        }
        std::sort(pc.scores.begin(), pc.scores.end());
    }
    return L;
}

void build_interval_row(std::span<const double> mu, std::span<const double> sigma, const CalibrationLedger& ledger,
                        std::span<double> lower, std::span<double> upper) {
    std::vector<double> q(ledger.per_cluster.size());
    for (std::size_t c = 0; c < q.size(); ++c) {
        q[c] = ledger.per_cluster[c].quantile();
    }
    for (std::size_t n = 0; n < mu.size(); ++n) {
        if (n >= ledger.clusters.labels.size()) {
            throw std::invalid_argument("build_intervals: node without cluster");
        }
        const double qn = q[static_cast<std::size_t>(ledger.clusters.labels[n])];
        if (std::isinf(qn)) {
            lower[n] = -kInfiniteQuantile;
            upper[n] = kInfiniteQuantile;
        } else {
            lower[n] = mu[n] - qn * sigma[n];
            upper[n] = mu[n] + qn * sigma[n];
        }
    }
}

PredictionIntervalSet build_intervals(const ForecastBundle& fb, const CalibrationLedger& ledger) {
    if (ledger.clusters.labels.size() != fb.mu.nodes) {
        throw std::invalid_argument("build_intervals: ledger covers a different node count");
    }
    PredictionIntervalSet out;
    out.t0 = fb.t0;
    out.nominal = 1.0 - ledger.alpha;
    out.lower = Panel(fb.mu.steps, fb.mu.nodes);
    out.upper = Panel(fb.mu.steps, fb.mu.nodes);
    out.unbounded.assign(fb.mu.nodes, false);
    for (std::size_t n = 0; n < fb.mu.nodes; ++n) {
        out.unbounded[n] = std::isinf(ledger.quantile_for_node(n));
    }
    for (std::size_t t = 0; t < fb.mu.steps; ++t) {
        build_interval_row(fb.mu.row(t), fb.sigma.row(t), ledger, out.lower.row(t), out.upper.row(t));
    }
    return out;
}

void aci_step(CalibrationLedger& ledger, std::span<const double> y, std::span<const double> lower,
              std::span<const double> upper) {
    const std::size_t K = ledger.per_cluster.size();
    std::vector<double> miss(K, 0.0);
    std::vector<double> count(K, 0.0);
    for (std::size_t n = 0; n < y.size(); ++n) {
        const auto c = static_cast<std::size_t>(ledger.clusters.labels[n]);
        miss[c] += (y[n] < lower[n] || y[n] > upper[n]) ? 1.0 : 0.0;
        count[c] += 1.0;
    }
    for (std::size_t c = 0; c < K; ++c) {
        if (count[c] > 0.0) {
            auto& pc = ledger.per_cluster[c];
            pc.alpha_t = aci_update(pc.alpha_t, miss[c] / count[c], ledger.gamma_aci, ledger.alpha, ledger.sign);
        }
    }
}

double coverage_efficiency(double coverage, double riw) {
    if (!(riw > 0.0)) {
        throw std::invalid_argument("coverage efficiency undefined for zero interval width");
    }
    return coverage / riw;
}

CoverageReport evaluate_coverage(const PredictionIntervalSet& intervals, const Panel& truth, double data_range) {
    if (truth.steps != intervals.lower.steps || truth.nodes != intervals.lower.nodes || truth.values.empty()) {
        throw std::invalid_argument("evaluate_coverage: shape mismatch or empty input");
    }
    if (!(data_range > 0.0)) {
        throw std::invalid_argument("evaluate_coverage: data range must be positive");
    }
    std::size_t inside = 0;
    double width = 0.0;
    for (std::size_t i = 0; i < truth.values.size(); ++i) {
        const double lo = intervals.lower.values[i];
        const double hi = intervals.upper.values[i];
        inside += (truth.values[i] >= lo && truth.values[i] <= hi);
        width += hi - lo;
    }
    CoverageReport r;
    const double n = static_cast<double>(truth.values.size());
    r.coverage = static_cast<double>(inside) / n;
    r.riw = width / n / data_range;
    r.efficiency = coverage_efficiency(r.coverage, r.riw);
    return r;
}

}  // namespace tuq
