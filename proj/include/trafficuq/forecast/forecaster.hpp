#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "trafficuq/common/io.hpp"
#include "trafficuq/common/panel.hpp"
#include "trafficuq/forecast/attention.hpp"
#include "trafficuq/forecast/graph.hpp"
#include "trafficuq/forecast/het_predictor.hpp"

namespace tuq {

/// One-step-ahead predictions for rows [t0, t0 + mu.steps) of a panel.
struct ForecastBundle {
    std::size_t t0 = 0;
    std::size_t horizon = 1;
    Panel mu;
    Panel sigma;
    std::vector<int> cluster;  // per node; -1 until calibrated
};

struct ForecasterConfig {
    std::size_t lags = 3;
    std::size_t steps_per_day = 96;
    std::size_t days_per_week = 7;
    bool seasonal_lag = true;
    bool neighbor_feature = true;
    std::size_t max_samples = 20000;
    double gamma_raw = 0.0;
    double self_loop_bias = 0.0;
    std::uint64_t seed = 0;
    HetFitOptions fit;
};

/// Shared heteroscedastic predictor over node-normalized lag features. The
/// neighbor feature is an uncertainty-guided attention average of the
/// previous step, with node volatility as the uncertainty.
class Forecaster {
public:
    explicit Forecaster(ForecasterConfig cfg = {}) : cfg_(cfg) {}

    /// Fits on rows [0, train_end) of y.
    void fit(const Panel& y, const GraphTopology& g, std::size_t train_end);

    /// Predicts rows [begin, end); requires begin >= min_history().
    ForecastBundle predict(const Panel& y, std::size_t begin, std::size_t end) const;

    /// Predicts a single row t into mu/sigma (length N).
    void predict_row(const Panel& y, std::size_t t, std::span<double> mu, std::span<double> sigma) const;

    std::size_t min_history() const;
    std::size_t feature_dim() const;
    const HetPredictor& model() const { return model_; }
    const std::vector<double>& loss_trace() const { return loss_trace_; }

    Json to_json() const;
    static Forecaster from_json(const Json& j, const GraphTopology& g);

private:
    void features(const Panel& y, std::size_t t, std::size_t n, std::span<double> out) const;
    void build_attention(const GraphTopology& g);

    ForecasterConfig cfg_;
    HetPredictor model_;
    std::vector<double> node_mean_;
    std::vector<double> node_scale_;
    std::vector<double> node_volatility_;
    std::vector<std::vector<std::size_t>> nb_;
    std::vector<std::vector<double>> attn_;
    std::vector<double> loss_trace_;
};

}  // namespace tuq
