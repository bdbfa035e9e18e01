#include "trafficuq/sim/pipeline.hpp"

#include <cmath>
#include <stdexcept>

#include "trafficuq/conformal/clustering.hpp"

namespace tuq {

namespace {

std::string covariance_name(CovarianceKind k) {
    switch (k) {
        case CovarianceKind::Diagonal: return "diagonal";
        case CovarianceKind::DistanceKernel: return "kernel";
        case CovarianceKind::Empirical: return "empirical";
    }
    return "kernel";
}

std::string procedure_name(FdrProcedure p) { return p == FdrProcedure::BY ? "by" : "bh"; }

std::string rule_name(PValueRule r) { return r == PValueRule::Min ? "min" : "weighted_geometric"; }

Json forecaster_config_json(const ForecasterConfig& c) {
    Json j;
    j["lags"] = c.lags;
    j["steps_per_day"] = c.steps_per_day;
    j["days_per_week"] = c.days_per_week;
    j["seasonal_lag"] = c.seasonal_lag;
    j["neighbor_feature"] = c.neighbor_feature;
    j["max_samples"] = c.max_samples;
    j["gamma_raw"] = c.gamma_raw;
    j["self_loop_bias"] = c.self_loop_bias;
    j["iterations"] = c.fit.iterations;
    j["step"] = c.fit.step;
    return j;
}

ForecasterConfig forecaster_config_from(const Json& j) {
    ForecasterConfig c;
    const Json defaults = forecaster_config_json(c);
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("unknown forecaster key: " + key);
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("lags", c.lags);
    get("steps_per_day", c.steps_per_day);
    get("days_per_week", c.days_per_week);
    get("seasonal_lag", c.seasonal_lag);
    get("neighbor_feature", c.neighbor_feature);
    get("max_samples", c.max_samples);
    get("gamma_raw", c.gamma_raw);
    get("self_loop_bias", c.self_loop_bias);
    get("iterations", c.fit.iterations);
    get("step", c.fit.step);
    return c;
}

std::vector<double> normalized_block(const Panel& y, const ForecastBundle& fb) {
    std::vector<double> z;
    z.reserve(fb.mu.values.size());
    for (std::size_t t = 0; t < fb.mu.steps; ++t) {
        const auto zt = normalize_residuals(y.row(fb.t0 + t), fb.mu.row(t), fb.sigma.row(t));
        z.insert(z.end(), zt.begin(), zt.end());
    }
    return z;
}

}  // namespace

Json DetectionOptions::to_json() const {
    Json j;
    j["clusters"] = clusters;
    j["alpha"] = alpha;
    j["gamma_aci"] = gamma_aci;
    j["tau_gap"] = tau_gap;
    j["scorer"] = scorer_kind_name(scorer);
    j["trim_tau"] = trim_tau;
    j["fdr_alpha"] = fdr_alpha;
    j["procedure"] = procedure_name(procedure);
    j["covariance"] = covariance_name(covariance);
    j["pvalue_rule"] = rule_name(pvalue_rule);
    j["forecaster"] = forecaster_config_json(forecaster);
    j["seed"] = seed;
    return j;
}

DetectionOptions DetectionOptions::from_json(const Json& j) {
    DetectionOptions o;
    const Json defaults = o.to_json();
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("unknown detection key: " + key);
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("clusters", o.clusters);
    get("alpha", o.alpha);
    get("gamma_aci", o.gamma_aci);
    get("tau_gap", o.tau_gap);
    get("trim_tau", o.trim_tau);
    get("fdr_alpha", o.fdr_alpha);
    get("seed", o.seed);
    if (j.contains("scorer")) o.scorer = parse_scorer_kind(j.at("scorer").get<std::string>());
    if (j.contains("procedure")) o.procedure = parse_fdr_procedure(j.at("procedure").get<std::string>());
    if (j.contains("covariance")) o.covariance = parse_covariance_kind(j.at("covariance").get<std::string>());
    if (j.contains("pvalue_rule")) o.pvalue_rule = parse_pvalue_rule(j.at("pvalue_rule").get<std::string>());
    if (j.contains("forecaster")) o.forecaster = forecaster_config_from(j.at("forecaster"));
    if (!(o.alpha > 0.0 && o.alpha < 1.0) || !(o.fdr_alpha > 0.0 && o.fdr_alpha < 1.0)) {
        throw std::invalid_argument("alpha and fdr_alpha must lie in (0, 1)");
    }
    if (o.trim_tau < 0.0 || o.trim_tau >= 0.5) {
        throw std::invalid_argument("trim_tau must lie in [0, 0.5)");
    }
    return o;
}

Json DetectionStack::to_json() const {
    Json j;
    j["format"] = "trafficuq-detector";
    j["version"] = 1;
    j["options"] = options.to_json();
    j["forecaster"] = forecaster.to_json();
    j["ledger"] = ledger.to_json();
    j["scorer"] = scorer.to_json();
    Json trim;
    trim["tau"] = trimmed.tau;
    trim["original_size"] = trimmed.original_size;
    trim["threshold"] = json_number(trimmed.threshold);
    trim["degenerate"] = trimmed.degenerate;
    trim["retained"] = trimmed.retained;
    j["trimmed"] = trim;
    Json cov;
    cov["kind"] = covariance_name(covariance.kind);
    cov["length_scale_km"] = covariance.length_scale_km;
    cov["cutoff_km"] = covariance.cutoff_km;
    if (covariance.kind == CovarianceKind::Empirical) {
        Json rows = Json::array();
        for (Eigen::Index r = 0; r < covariance.empirical.rows(); ++r) {
            Json row = Json::array();
            for (Eigen::Index c = 0; c < covariance.empirical.cols(); ++c) row.push_back(covariance.empirical(r, c));
            rows.push_back(row);
        }
        cov["empirical"] = rows;
    }
    j["covariance"] = cov;
    return j;
}

DetectionStack DetectionStack::from_json(const Json& j, GraphTopology cells, CoverageMap coverage) {
    if (j.value("format", "") != "trafficuq-detector") {
        throw std::invalid_argument("not a trafficuq detector document");
    }
    DetectionStack s;
    s.options = DetectionOptions::from_json(j.at("options"));
    s.forecaster = Forecaster::from_json(j.at("forecaster"), cells);
    s.ledger = CalibrationLedger::from_json(j.at("ledger"));
    s.scorer = ScoreProvider::from_json(j.at("scorer"));
    const Json& trim = j.at("trimmed");
    s.trimmed.tau = trim.at("tau").get<double>();
    s.trimmed.original_size = trim.at("original_size").get<std::size_t>();
    s.trimmed.threshold = json_to_double(trim.at("threshold"));
    s.trimmed.degenerate = trim.at("degenerate").get<bool>();
    s.trimmed.retained = trim.at("retained").get<std::vector<double>>();
    const Json& cov = j.at("covariance");
    s.covariance.kind = parse_covariance_kind(cov.at("kind").get<std::string>());
    s.covariance.length_scale_km = cov.at("length_scale_km").get<double>();
    s.covariance.cutoff_km = cov.at("cutoff_km").get<double>();
    if (cov.contains("empirical")) {
        const auto& rows = cov.at("empirical");
        const auto n = static_cast<Eigen::Index>(rows.size());
        s.covariance.empirical.resize(n, n);
        for (Eigen::Index r = 0; r < n; ++r) {
            for (Eigen::Index c = 0; c < n; ++c) s.covariance.empirical(r, c) = rows[r][c].get<double>();
        }
    }
    if (cells.node_count() != coverage.cell_count() || s.ledger.clusters.labels.size() != cells.node_count()) {
        throw std::invalid_argument("detector does not match the cell layout");
    }
    s.cells = std::move(cells);
    s.coverage = std::move(coverage);
    return s;
}

DetectionStack build_detection_stack(const Panel& y, GraphTopology cells, CoverageMap coverage,
                                     const DatasetSplits& splits, const DetectionOptions& options) {
    if (cells.node_count() != y.nodes || coverage.cell_count() != y.nodes) {
        throw std::invalid_argument("build_detection_stack: panel, graph and coverage map disagree on cell count");
    }
    DetectionStack s;
    s.options = options;
    s.cells = std::move(cells);
    s.coverage = std::move(coverage);
    ForecasterConfig fc = options.forecaster;
    fc.seed = stream_seed(options.seed, "forecaster");
    s.forecaster = Forecaster(fc);
    s.forecaster.fit(y, s.cells, splits.fit_end);

    const auto val = s.forecaster.predict(y, splits.val_begin, splits.val_end);
    Panel abs_res(val.mu.steps, y.nodes);
    for (std::size_t t = 0; t < abs_res.steps; ++t) {
        for (std::size_t n = 0; n < y.nodes; ++n) abs_res.at(t, n) = std::abs(y.at(val.t0 + t, n) - val.mu.at(t, n));
    }
    const std::size_t K = std::min(options.clusters, y.nodes);
    const auto clusters = cluster_nodes(node_error_stats(abs_res), K, stream_seed(options.seed, "clusters"));

    const auto cal = s.forecaster.predict(y, splits.cal_begin, splits.cal_end);
    s.ledger = calibrate_ledger(cal, y.slice(splits.cal_begin, splits.cal_end), clusters, options.alpha,
                                options.gamma_aci, options.tau_gap);

    s.scorer = fit_scorer(normalized_block(y, val), options.scorer);
    s.trimmed = trim_calibration(s.scorer.score(normalized_block(y, cal)), options.trim_tau);

    s.covariance.kind = options.covariance;
    if (options.covariance == CovarianceKind::Empirical) {
        Panel res(val.mu.steps, y.nodes);
        for (std::size_t t = 0; t < res.steps; ++t) {
            for (std::size_t n = 0; n < y.nodes; ++n) res.at(t, n) = y.at(val.t0 + t, n) - val.mu.at(t, n);
        }
        s.covariance.empirical = empirical_residual_cov(res, s.cells.coords, s.covariance.cutoff_km);
    }
    return s;
}

Pipeline::Pipeline(const DetectionStack& stack, bool adapt) : stack_(&stack), ledger_(stack.ledger), adapt_(adapt) {}

PipelineStep Pipeline::observe(const Panel& y, std::size_t t) {
    const std::size_t N = y.nodes;
    if (N != stack_->coverage.cell_count()) {
        throw std::invalid_argument("Pipeline::observe: panel width does not match the coverage map");
    }
    if (t >= y.steps || t < min_history()) {
        throw std::invalid_argument("Pipeline::observe: row outside the usable range");
    }
    PipelineStep out;
    out.row = t;
    if (next_row_ != t) {
        mu_next_.assign(N, 0.0);
        sigma_next_.assign(N, 0.0);
        stack_->forecaster.predict_row(y, t, mu_next_, sigma_next_);
    }
    const auto yt = y.row(t);
    out.lower.assign(N, 0.0);
    out.upper.assign(N, 0.0);
    build_interval_row(mu_next_, sigma_next_, ledger_, out.lower, out.upper);
    if (adapt_) aci_step(ledger_, yt, out.lower, out.upper);

    const auto z = normalize_residuals(yt, mu_next_, sigma_next_);
    out.pvalues = conformal_pvalues(stack_->trimmed, stack_->scorer.score(z));
    out.rejections = run_fdr(stack_->options.procedure, out.pvalues, stack_->options.fdr_alpha);
    out.p_int = aggregate_pvalues(out.pvalues, stack_->coverage, stack_->options.pvalue_rule);
    out.flags = aggregate_flags(out.rejections.mask, stack_->coverage);

    stack_->forecaster.predict_row(y, t + 1, mu_next_, sigma_next_);
    next_row_ = t + 1;
    out.mu_int = aggregate_mean(mu_next_, stack_->coverage);
    out.sigma_int = aggregate_variance(sigma_next_, stack_->coverage, stack_->covariance);
    return out;
}

}  // namespace tuq
