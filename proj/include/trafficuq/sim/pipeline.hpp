#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "trafficuq/anomaly/fdr.hpp"
#include "trafficuq/anomaly/pvalues.hpp"
#include "trafficuq/anomaly/scorer.hpp"
#include "trafficuq/common/io.hpp"
#include "trafficuq/common/panel.hpp"
#include "trafficuq/conformal/calibration.hpp"
#include "trafficuq/forecast/forecaster.hpp"
#include "trafficuq/forecast/graph.hpp"
#include "trafficuq/sim/dataset.hpp"
#include "trafficuq/spatial/aggregate.hpp"
#include "trafficuq/spatial/covariance.hpp"
#include "trafficuq/spatial/coverage_map.hpp"

namespace tuq {

struct DetectionOptions {
    std::size_t clusters = 15;
    double alpha = 0.1;
    double gamma_aci = 0.05;
    std::size_t tau_gap = 24;
    ScorerKind scorer = ScorerKind::GaussianNll;
    double trim_tau = 0.02;
    double fdr_alpha = 0.05;
    FdrProcedure procedure = FdrProcedure::BY;
    CovarianceKind covariance = CovarianceKind::DistanceKernel;
    PValueRule pvalue_rule = PValueRule::Min;
    ForecasterConfig forecaster;
    std::uint64_t seed = 0;

    Json to_json() const;
    /// Unknown keys are rejected.
    static DetectionOptions from_json(const Json& j);
};

/// Everything fitted offline that the online pipeline needs.
struct DetectionStack {
    DetectionOptions options;
    GraphTopology cells;
    CoverageMap coverage;
    Forecaster forecaster;
    CalibrationLedger ledger;
    ScoreProvider scorer;
    TrimmedCalibration trimmed;
    CovarianceModel covariance;

    /// Fitted parts only; the graph and coverage map come from the sim config.
    Json to_json() const;
    static DetectionStack from_json(const Json& j, GraphTopology cells, CoverageMap coverage);
};

/// Fits the forecaster on the fit block, clusters nodes on validation
/// residuals, calibrates quantiles and the anomaly scorer on the calibration
/// block.
DetectionStack build_detection_stack(const Panel& y, GraphTopology cells, CoverageMap coverage,
                                     const DatasetSplits& splits, const DetectionOptions& options);

/// Result of observing one row.
struct PipelineStep {
    std::size_t row = 0;
    std::vector<double> lower, upper;  // interval for the observed row
    std::vector<double> pvalues;
    RejectionSet rejections;
    std::vector<double> p_int;
    std::vector<double> flags;
    std::vector<double> mu_int;     // aggregated forecast for the next row
    std::vector<double> sigma_int;
};

/// Online forecast, interval, p-value, FDR and aggregation chain. The ledger
/// is copied and adapted by ACI as rows arrive.
class Pipeline {
public:
    explicit Pipeline(const DetectionStack& stack, bool adapt = true);

    /// Row t of y has just been observed. Scores it against the forecast made
    /// before it arrived and forecasts row t + 1 from rows <= t. Rows after t
    /// are never read.
    PipelineStep observe(const Panel& y, std::size_t t);

    const CalibrationLedger& ledger() const { return ledger_; }
    std::size_t min_history() const { return stack_->forecaster.min_history(); }

private:
    const DetectionStack* stack_;
    CalibrationLedger ledger_;
    bool adapt_;
    std::size_t next_row_ = static_cast<std::size_t>(-1);
    std::vector<double> mu_next_, sigma_next_;
};

}  // namespace tuq
