#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <mutex>
#include <shared_mutex>
#include <span>
#include <vector>

#include "trafficuq/common/io.hpp"
#include "trafficuq/common/panel.hpp"
#include "trafficuq/conformal/clustering.hpp"
#include "trafficuq/forecast/forecaster.hpp"

namespace tuq {

inline constexpr double kAlphaMin = 0.001;
inline constexpr double kAlphaMax = 0.999;
inline constexpr double kInfiniteQuantile = std::numeric_limits<double>::infinity();

/// |y - mu| / sigma, elementwise.
std::vector<double> conformity_scores(std::span<const double> y, std::span<const double> mu,
                                      std::span<const double> sigma);

/// The ceil((1 - alpha)(n + 1))-th smallest score, or +inf when that index exceeds n.
double cluster_quantile(std::span<const double> scores, double alpha);

enum class AciSign {
    Standard,  // alpha + gamma (target - err): a miss lowers alpha
    Appendix,  // alpha + gamma (err - target)
};

/// One adaptive step, clamped to [kAlphaMin, kAlphaMax]. err may be a miss
/// indicator or a miss fraction in [0, 1].
double aci_update(double alpha_t, double err, double gamma, double target, AciSign sign = AciSign::Standard);

struct ClusterCalibration {
    std::vector<double> scores;  // sorted ascending
    double alpha_t = 0.1;
    double quantile() const { return cluster_quantile(scores, alpha_t); }
};

struct CalibrationLedger {
    double alpha = 0.1;
    double gamma_aci = 0.05;
    std::size_t tau_gap = 24;
    AciSign sign = AciSign::Standard;
    ClusterAssignment clusters;
    std::vector<ClusterCalibration> per_cluster;

    double quantile_for_node(std::size_t node) const;

    Json to_json() const;
    static CalibrationLedger from_json(const Json& j);
};

/// Collects scores of rows of (y, forecast) by cluster; all alpha_t start at alpha.
CalibrationLedger calibrate_ledger(const ForecastBundle& cal, const Panel& y_cal, const ClusterAssignment& clusters,
                                   double alpha, double gamma_aci, std::size_t tau_gap);

struct PredictionIntervalSet {
    std::size_t t0 = 0;
    double nominal = 0.9;
    Panel lower;
    Panel upper;
    std::vector<bool> unbounded;  // per node
};

/// [mu - q sigma, mu + q sigma] with the node's cluster quantile.
PredictionIntervalSet build_intervals(const ForecastBundle& fb, const CalibrationLedger& ledger);

/// Intervals for one row using current per-cluster quantiles.
void build_interval_row(std::span<const double> mu, std::span<const double> sigma, const CalibrationLedger& ledger,
                        std::span<double> lower, std::span<double> upper);

/// Per-cluster ACI step from one row of truths; err is the cluster's miss fraction.
void aci_step(CalibrationLedger& ledger, std::span<const double> y, std::span<const double> lower,
              std::span<const double> upper);

struct CoverageReport {
    double coverage = 0.0;
    double riw = 0.0;
    double efficiency = 0.0;
};

CoverageReport evaluate_coverage(const PredictionIntervalSet& intervals, const Panel& truth, double data_range);

/// Efficiency from already-measured coverage and RIW; rejects RIW <= 0.
double coverage_efficiency(double coverage, double riw);

/// Single writer, many readers.
class SharedLedger {
public:
    explicit SharedLedger(CalibrationLedger ledger) : ledger_(std::move(ledger)) {}

    template <class F>
    auto read(F&& f) const {
        std::shared_lock lock(mutex_);
        return f(static_cast<const CalibrationLedger&>(ledger_));
    }

    template <class F>
    auto write(F&& f) {
        std::unique_lock lock(mutex_);
        return f(ledger_);
    }

private:
    mutable std::shared_mutex mutex_;
    CalibrationLedger ledger_;
};

}  // namespace tuq
