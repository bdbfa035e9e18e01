#include "trafficuq/forecast/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

#include "trafficuq/common/math.hpp"
#include "trafficuq/common/rng.hpp"

namespace tuq {

std::size_t Forecaster::min_history() const {
    return cfg_.seasonal_lag ? std::max(cfg_.lags, cfg_.steps_per_day) : cfg_.lags;
}

std::size_t Forecaster::feature_dim() const {
    return cfg_.lags + (cfg_.neighbor_feature ? 1 : 0) + (cfg_.seasonal_lag ? 1 : 0) + 4;
}

void Forecaster::features(const Panel& y, std::size_t t, std::size_t n, std::span<double> out) const {
    auto z = [&](std::size_t tt, std::size_t nn) { return (y.at(tt, nn) - node_mean_[nn]) / node_scale_[nn]; };
    std::size_t k = 0;
    for (std::size_t l = 1; l <= cfg_.lags; ++l) {
        out[k++] = z(t - l, n);
    }
    if (cfg_.neighbor_feature) {
        double agg = 0.0;
        for (std::size_t q = 0; q < nb_[n].size(); ++q) {
            agg += attn_[n][q] * z(t - 1, nb_[n][q]);
        }
        out[k++] = agg;
    }
    if (cfg_.seasonal_lag) {
        out[k++] = z(t - cfg_.steps_per_day, n);
    }
    const double day = 2.0 * std::numbers::pi * static_cast<double>(t % cfg_.steps_per_day) /
                       static_cast<double>(cfg_.steps_per_day);
    const std::size_t week_len = cfg_.steps_per_day * cfg_.days_per_week;
    const double week = 2.0 * std::numbers::pi * static_cast<double>(t % week_len) / static_cast<double>(week_len);
    out[k++] = std::sin(day);
    out[k++] = std::cos(day);
    out[k++] = std::sin(week);
    out[k++] = std::cos(week);
}

void Forecaster::build_attention(const GraphTopology& g) {
    AttentionParams ap;
    ap.W = Eigen::MatrixXd::Zero(1, 1);
    ap.a = Eigen::VectorXd::Zero(2);
    ap.gamma_raw = cfg_.gamma_raw;
    ap.self_loop_bias = cfg_.self_loop_bias;
    nb_ = g.neighborhoods;
    attn_.assign(g.node_count(), {});
    for (std::size_t i = 0; i < g.node_count(); ++i) {
        std::vector<double> logits(nb_[i].size(), 0.0);
        std::vector<double> sig(nb_[i].size());
        for (std::size_t q = 0; q < nb_[i].size(); ++q) {
            sig[q] = node_volatility_[nb_[i][q]];
        }
        attn_[i] = pugat_attention(logits, sig, g.self_position(i), ap);
    }
}

void Forecaster::fit(const Panel& y, const GraphTopology& g, std::size_t train_end) {
    g.validate();
    if (g.node_count() != y.nodes) {
        throw std::invalid_argument("Forecaster::fit: graph and panel node counts differ");
    }
    if (train_end > y.steps || train_end <= min_history() + 1) {
        throw std::invalid_argument("Forecaster::fit: training window shorter than required history");
    }
    const std::size_t N = y.nodes;
    node_mean_.assign(N, 0.0);
    node_scale_.assign(N, 1.0);
    node_volatility_.assign(N, 1.0);
    for (std::size_t n = 0; n < N; ++n) {
        std::vector<double> col(train_end);
        std::vector<double> diff(train_end - 1);
        for (std::size_t t = 0; t < train_end; ++t) {
            col[t] = y.at(t, n);
            if (t > 0) {
                diff[t - 1] = col[t] - col[t - 1];
            }
        }
        node_mean_[n] = mean(col);
        const double sd = sample_stddev(col);
        node_scale_[n] = sd > 1e-9 ? sd : 1.0;
        node_volatility_[n] = std::max(sample_stddev(diff) / node_scale_[n], 1e-3);
    }
    build_attention(g);

    const std::size_t h = min_history();
    const std::size_t total = (train_end - h) * N;
    std::vector<std::size_t> picks(total);
    std::iota(picks.begin(), picks.end(), std::size_t{0});
    if (total > cfg_.max_samples) {
        auto rng = make_rng(cfg_.seed, "forecaster.subsample");
        std::shuffle(picks.begin(), picks.end(), rng);
        picks.resize(cfg_.max_samples);
        std::sort(picks.begin(), picks.end());
    }
    const std::size_t p = feature_dim();
    Eigen::MatrixXd X(static_cast<Eigen::Index>(picks.size()), static_cast<Eigen::Index>(p));
    Eigen::VectorXd target(static_cast<Eigen::Index>(picks.size()));
    std::vector<double> buf(p);
    for (std::size_t r = 0; r < picks.size(); ++r) {
        const std::size_t t = h + picks[r] / N;
        const std::size_t n = picks[r] % N;
        features(y, t, n, buf);
        for (std::size_t k = 0; k < p; ++k) {
            X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = buf[k];
        }
        target(static_cast<Eigen::Index>(r)) = (y.at(t, n) - node_mean_[n]) / node_scale_[n];
    }
    auto res = fit_heteroscedastic(X, target, cfg_.fit);
    model_ = std::move(res.model);
    loss_trace_ = std::move(res.loss_trace);
}

void Forecaster::predict_row(const Panel& y, std::size_t t, std::span<double> mu, std::span<double> sigma) const {
    if (t < min_history() || t > y.steps) {
        throw std::invalid_argument("Forecaster::predict_row: not enough history for row " + std::to_string(t));
    }
    std::vector<double> buf(feature_dim());
    for (std::size_t n = 0; n < y.nodes; ++n) {
        features(y, t, n, buf);
        const auto [m, s] = model_.predict(buf);
        mu[n] = node_mean_[n] + node_scale_[n] * m;
        sigma[n] = node_scale_[n] * s;
    }
}

ForecastBundle Forecaster::predict(const Panel& y, std::size_t begin, std::size_t end) const {
    if (node_mean_.size() != y.nodes) {
        throw std::invalid_argument("Forecaster::predict: model not fitted for this panel");
    }
    if (begin < min_history() || end > y.steps || begin > end) {
        throw std::invalid_argument("Forecaster::predict: bad row range");
    }
    ForecastBundle b;
    b.t0 = begin;
    b.mu = Panel(end - begin, y.nodes);
    b.sigma = Panel(end - begin, y.nodes);
    b.cluster.assign(y.nodes, -1);
    for (std::size_t t = begin; t < end; ++t) {
        predict_row(y, t, b.mu.row(t - begin), b.sigma.row(t - begin));
    }
    return b;
}

Json Forecaster::to_json() const {
    Json j;
    j["lags"] = cfg_.lags;
    j["steps_per_day"] = cfg_.steps_per_day;
    j["days_per_week"] = cfg_.days_per_week;
    j["seasonal_lag"] = cfg_.seasonal_lag;
    j["neighbor_feature"] = cfg_.neighbor_feature;
    j["gamma_raw"] = cfg_.gamma_raw;
    j["self_loop_bias"] = cfg_.self_loop_bias;
    j["node_mean"] = node_mean_;
    j["node_scale"] = node_scale_;
    j["node_volatility"] = node_volatility_;
    j["predictor"] = model_.to_json();
    return j;
}

Forecaster Forecaster::from_json(const Json& j, const GraphTopology& g) {
    ForecasterConfig cfg;
    cfg.lags = j.at("lags").get<std::size_t>();
    cfg.steps_per_day = j.at("steps_per_day").get<std::size_t>();
    cfg.days_per_week = j.at("days_per_week").get<std::size_t>();
    cfg.seasonal_lag = j.at("seasonal_lag").get<bool>();
    cfg.neighbor_feature = j.at("neighbor_feature").get<bool>();
    cfg.gamma_raw = j.at("gamma_raw").get<double>();
    cfg.self_loop_bias = j.at("self_loop_bias").get<double>();
    Forecaster f(cfg);
    f.node_mean_ = j.at("node_mean").get<std::vector<double>>();
    f.node_scale_ = j.at("node_scale").get<std::vector<double>>();
    f.node_volatility_ = j.at("node_volatility").get<std::vector<double>>();
    f.model_ = HetPredictor::from_json(j.at("predictor"));
    if (f.node_mean_.size() != g.node_count() || f.model_.input_dim() != f.feature_dim()) {
        throw std::invalid_argument("forecaster JSON does not match the graph or feature layout");
    }
    f.build_attention(g);
    return f;
}

}  // namespace tuq
