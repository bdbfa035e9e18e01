#include "trafficuq/cli/commands.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "trafficuq/anomaly/bootstrap.hpp"
#include "trafficuq/cli/run_config.hpp"
#include "trafficuq/common/csv.hpp"
#include "trafficuq/common/log.hpp"
#include "trafficuq/common/math.hpp"
#include "trafficuq/conformal/calibration.hpp"
#include "trafficuq/forecast/diagnostics.hpp"
#include "trafficuq/safety/toy_env.hpp"
#include "trafficuq/sim/closed_loop.hpp"
#include "trafficuq/sim/dataset.hpp"
#include "trafficuq/sim/pipeline.hpp"

namespace fs = std::filesystem;

namespace tuq {

namespace {

struct CommonArgs {
    std::optional<fs::path> config;
    std::optional<std::uint64_t> seed;
    fs::path out;
    std::vector<std::string> overrides;
};

void require_dir(const fs::path& p, const std::string& what) {
    if (p.empty() || !fs::is_directory(p)) {
        throw std::invalid_argument(what + " directory does not exist: " + p.string());
    }
}

void require_file(const fs::path& p) {
    if (!fs::is_regular_file(p)) throw std::invalid_argument("missing input file: " + p.string());
}

RunConfig resolve(const CommonArgs& a, std::vector<std::string> extra) {
    std::vector<std::string> all = a.overrides;
    all.insert(all.end(), extra.begin(), extra.end());
    if (a.seed) all.push_back("seed=" + std::to_string(*a.seed));
    RunConfig rc = load_run_config(a.config, all);
    require_dir(a.out, "output");
    return rc;
}

void write_config(const fs::path& out, const RunConfig& rc) {
    write_file_atomic(out / "config.json", dump_json(rc.to_json()));
}

TrafficSim layout_sim(const SimConfig& sc) { return TrafficSim(sc); }

DetectionStack load_detector(const fs::path& model_dir, const SimConfig& sc) {
    const auto file = model_dir / "detector.json";
    require_file(file);
    const TrafficSim sim = layout_sim(sc);
    return DetectionStack::from_json(read_json(file), sim.cell_graph(), sim.coverage());
}

Dataset load_data(const fs::path& dir) {
    require_dir(dir, "data");
    require_file(dir / "dataset.json");
    return read_dataset(dir);
}

int cmd_generate(const CommonArgs& a, std::optional<std::size_t> steps, std::ostream& out) {
    std::vector<std::string> extra;
    if (steps) extra.push_back("generate.steps=" + std::to_string(*steps));
    RunConfig rc = resolve(a, extra);
    SimConfig sc = rc.sim;
    sc.seed = rc.seed;
    const Dataset d = generate_dataset(sc, rc.steps, rc.detection.tau_gap,
                                       rc.detection.forecaster.seasonal_lag ? rc.detection.forecaster.steps_per_day
                                                                            : rc.detection.forecaster.lags);
    write_dataset(d, a.out);
    write_config(a.out, rc);
    out << "generated " << d.steps << " rows x " << d.observations.nodes << " cells, " << d.events.size()
        << " anomalies -> " << a.out.string() << "\n";
    return kExitOk;
}

int cmd_calibrate(const CommonArgs& a, const fs::path& data, std::ostream& out) {
    RunConfig rc = resolve(a, {});
    const Dataset d = load_data(data);
    const TrafficSim sim = layout_sim(d.config);
    DetectionOptions opts = rc.detection;
    opts.seed = rc.seed;
    const DetectionStack stack = build_detection_stack(d.observations, sim.cell_graph(), sim.coverage(), d.splits, opts);
    const auto& s = d.splits;
    const auto test = stack.forecaster.predict(d.observations, s.test_begin, s.test_end);
    const Panel truth = d.observations.slice(s.test_begin, s.test_end);
    const auto intervals = build_intervals(test, stack.ledger);
    double lo = truth.values.front(), hi = lo;
    for (double v : d.observations.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    const auto rep = evaluate_coverage(intervals, truth, hi - lo);

    // online ACI over the test block
    CalibrationLedger online = stack.ledger;
    std::size_t hits = 0;
    std::vector<double> lower(truth.nodes), upper(truth.nodes);
    for (std::size_t t = 0; t < truth.steps; ++t) {
        build_interval_row(test.mu.row(t), test.sigma.row(t), online, lower, upper);
        for (std::size_t n = 0; n < truth.nodes; ++n) hits += truth.at(t, n) >= lower[n] && truth.at(t, n) <= upper[n];
        aci_step(online, truth.row(t), lower, upper);
    }
    const double aci_cov = static_cast<double>(hits) / static_cast<double>(truth.values.size());

    const auto pit = pit_values(test.mu.values, test.sigma.values, truth.values);
    Panel pit_panel(truth.steps, truth.nodes);
    pit_panel.values = pit.pit;
    write_csv(a.out / "pit.csv", panel_to_long(pit_panel, "pit"));
    const std::vector<double> levels{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99};
    const auto rel = reliability_curve(test.mu.values, test.sigma.values, truth.values, levels);
    CsvTable rt;
    rt.header = {"level", "empirical"};
    for (std::size_t k = 0; k < rel.levels.size(); ++k) rt.rows.push_back({rel.levels[k], rel.empirical[k]});
    write_csv(a.out / "reliability.csv", rt);

    Json cov;
    cov["test_rows"] = truth.steps;
    cov["test_points"] = truth.values.size();
    cov["nominal"] = 1.0 - stack.ledger.alpha;
    cov["coverage"] = rep.coverage;
    cov["riw"] = rep.riw;
    cov["efficiency"] = rep.efficiency;
    cov["aci_coverage"] = aci_cov;
    cov["pit_ks"] = pit.ks;
    cov["pit_ks_critical_99"] = ks_critical_99(pit.pit.size());
    cov["reliability_error"] = rel.calibration_error;
    cov["clusters"] = stack.ledger.clusters.K;
    write_file_atomic(a.out / "coverage.json", dump_json(cov));
    write_file_atomic(a.out / "ledger.json", dump_json(stack.ledger.to_json()));
    write_file_atomic(a.out / "detector.json", dump_json(stack.to_json()));
    write_config(a.out, rc);
    out << "coverage " << rep.coverage << " (nominal " << 1.0 - stack.ledger.alpha << "), RIW " << rep.riw
        << ", efficiency " << rep.efficiency << ", ACI coverage " << aci_cov << "\n";
    return kExitOk;
}

struct FdrTotals {
    std::size_t rejections = 0;
    std::size_t false_rejections = 0;
    std::size_t true_rejections = 0;
    double fdp_sum = 0.0;
    double power_sum = 0.0;
    std::size_t rows_with_truth = 0;
};

Json fdr_totals_json(const FdrTotals& f, std::size_t rows, std::size_t anomalies) {
    Json j;
    j["rejections"] = f.rejections;
    j["false_rejections"] = f.false_rejections;
    j["pooled_fdr"] = f.rejections ? static_cast<double>(f.false_rejections) / static_cast<double>(f.rejections) : 0.0;
    j["mean_row_fdp"] = rows ? f.fdp_sum / static_cast<double>(rows) : 0.0;
    j["pooled_power"] = anomalies ? static_cast<double>(f.true_rejections) / static_cast<double>(anomalies) : 0.0;
    j["mean_row_power"] = f.rows_with_truth ? f.power_sum / static_cast<double>(f.rows_with_truth) : 0.0;
    return j;
}

int cmd_detect(const CommonArgs& a, const fs::path& data, const fs::path& model, std::ostream& out) {
    RunConfig rc = resolve(a, {});
    const Dataset d = load_data(data);
    require_dir(model, "model");
    DetectionStack stack = load_detector(model, d.config);
    // detection-time settings come from the run config
    stack.options.fdr_alpha = rc.detection.fdr_alpha;
    const auto& s = d.splits;
    if (s.test_begin >= s.test_end || s.test_end > d.steps) {
        throw std::invalid_argument("dataset has an empty test block");
    }
    if (s.test_begin < stack.forecaster.min_history()) {
        throw std::invalid_argument("test block starts before the forecaster history is available");
    }
    if (rc.detection.trim_tau != stack.trimmed.tau) {
        throw std::invalid_argument("detection.trim_tau differs from the calibrated detector; recalibrate");
    }
    const auto fb = stack.forecaster.predict(d.observations, s.test_begin, s.test_end);
    const std::size_t T = fb.mu.steps, N = fb.mu.nodes;
    Panel pv(T, N), rej_by(T, N), rej_bh(T, N);
    FdrTotals by_tot, bh_tot;
    std::size_t anomalies = 0;
    for (std::size_t t = 0; t < T; ++t) {
        const auto z = normalize_residuals(d.observations.row(s.test_begin + t), fb.mu.row(t), fb.sigma.row(t));
        const auto p = conformal_pvalues(stack.trimmed, stack.scorer.score(z));
        std::copy(p.begin(), p.end(), pv.row(t).begin());
        std::vector<bool> truth(N);
        for (std::size_t n = 0; n < N; ++n) {
            truth[n] = d.anomaly_mask.at(s.test_begin + t, n) > 0.5;
            anomalies += truth[n];
        }
        const bool any_truth = std::find(truth.begin(), truth.end(), true) != truth.end();
        for (auto [proc, panel, tot] : {std::tuple{FdrProcedure::BY, &rej_by, &by_tot},
                                        std::tuple{FdrProcedure::BH, &rej_bh, &bh_tot}}) {
            const auto r = run_fdr(proc, p, stack.options.fdr_alpha);
            for (std::size_t n = 0; n < N; ++n) {
                panel->at(t, n) = r.mask[n] ? 1.0 : 0.0;
                if (r.mask[n]) {
                    ++tot->rejections;
                    truth[n] ? ++tot->true_rejections : ++tot->false_rejections;
                }
            }
            const auto o = empirical_fdr(r.mask, truth);
            tot->fdp_sum += o.fdr;
            if (any_truth) {
                tot->power_sum += o.power;
                ++tot->rows_with_truth;
            }
        }
    }
    write_csv(a.out / "pvalues.csv", panel_to_long(pv, "value"));
    write_csv(a.out / "rejections_by.csv", panel_to_long(rej_by, "is_anomaly"));
    write_csv(a.out / "rejections_bh.csv", panel_to_long(rej_bh, "is_anomaly"));
    Json rep;
    rep["t0"] = s.test_begin;
    rep["rows"] = T;
    rep["cells"] = N;
    rep["alpha"] = stack.options.fdr_alpha;
    rep["trim_tau"] = stack.trimmed.tau;
    rep["calibration_retained"] = stack.trimmed.size();
    rep["c_m"] = harmonic_number(N);
    rep["anomalous_points"] = anomalies;
    rep["by"] = fdr_totals_json(by_tot, T, anomalies);
    rep["bh"] = fdr_totals_json(bh_tot, T, anomalies);
    write_file_atomic(a.out / "fdr_report.json", dump_json(rep));
    write_config(a.out, rc);
    out << "BY: " << by_tot.rejections << " rejections, FDR " << rep["by"]["pooled_fdr"].get<double>() << ", power "
        << rep["by"]["pooled_power"].get<double>() << "\n";
    out << "BH: " << bh_tot.rejections << " rejections, FDR " << rep["bh"]["pooled_fdr"].get<double>() << ", power "
        << rep["bh"]["pooled_power"].get<double>() << "\n";
    return kExitOk;
}

void print_certificate(const SafetyCertificate& c, std::ostream& out) {
    out << "eps_model " << c.eps_model << ", L_L " << c.L_L << ", J_W " << c.J_W << ", eps* " << c.eps_star
        << ", verdict " << verdict_name(c.verdict) << " after " << c.history.size() << " rounds\n";
}

int cmd_certify(const CommonArgs& a, const std::optional<fs::path>& data, const std::optional<fs::path>& model,
                bool toy, std::ostream& out) {
    RunConfig rc = resolve(a, {});
    if (toy) {
        ToyEnvConfig tc;
        tc.max_rounds = rc.max_rounds;
        tc.members = rc.safety.members;
        const auto r = run_toy_experiment(tc, rc.seed);
        write_file_atomic(a.out / "certificate.json", dump_json(r.certificate.to_json()));
        write_config(a.out, rc);
        print_certificate(r.certificate, out);
        return kExitOk;
    }
    if (!data || !model) throw std::invalid_argument("certify needs --data and --model, or --toy");
    const Dataset d = load_data(*data);
    require_dir(*model, "model");
    const DetectionStack stack = load_detector(*model, d.config);
    ClosedLoopConfig cl = rc.closed_loop;
    cl.sim = d.config;
    const auto sm = build_traffic_safety(cl, stack, rc.safety, stream_seed(rc.seed, "certify/model"));
    const auto cert = certify_traffic(cl, stack, sm, stream_seed(rc.seed, "certify/rollouts"), rc.max_rounds);
    write_file_atomic(a.out / "safety_model.json", dump_json(sm.to_json()));
    write_file_atomic(a.out / "certificate.json", dump_json(cert.to_json()));
    write_config(a.out, rc);
    print_certificate(cert, out);
    return kExitOk;
}

Json summarize(const std::vector<ClosedLoopMetrics>& runs) {
    auto stat = [&](auto field) {
        double m = 0.0, v = 0.0;
        for (const auto& r : runs) m += field(r);
        m /= static_cast<double>(runs.size());
        for (const auto& r : runs) v += (field(r) - m) * (field(r) - m);
        const double sd = runs.size() > 1 ? std::sqrt(v / static_cast<double>(runs.size() - 1)) : 0.0;
        Json j;
        j["mean"] = m;
        j["ci95"] = 1.96 * sd / std::sqrt(static_cast<double>(runs.size()));
        return j;
    };
    Json j;
    j["safety_pct"] = stat([](const ClosedLoopMetrics& r) { return r.safety_pct; });
    j["violations_per_episode"] = stat([](const ClosedLoopMetrics& r) { return r.violations_per_episode; });
    j["rho_lyap"] = stat([](const ClosedLoopMetrics& r) { return r.rho_lyap; });
    j["mean_reward"] = stat([](const ClosedLoopMetrics& r) { return r.mean_reward; });
    j["mean_dc"] = stat([](const ClosedLoopMetrics& r) { return r.mean_dc; });
    Json per = Json::array();
    for (const auto& r : runs) per.push_back(r.to_json());
    j["per_seed"] = per;
    return j;
}

int cmd_simulate(const CommonArgs& a, const fs::path& data, const fs::path& model, const std::string& filter,
                 std::ostream& out) {
    RunConfig rc = resolve(a, {});
    if (rc.seeds == 0) throw std::invalid_argument("simulate needs at least one seed");
    if (filter != "on" && filter != "off" && filter != "both") {
        throw std::invalid_argument("--filter must be on, off or both");
    }
    const Dataset d = load_data(data);
    require_dir(model, "model");
    const DetectionStack stack = load_detector(model, d.config);
    ClosedLoopConfig cl = rc.closed_loop;
    cl.sim = d.config;
    TrafficSafetyModel sm;
    if (fs::is_regular_file(model / "safety_model.json")) {
        sm = TrafficSafetyModel::from_json(read_json(model / "safety_model.json"));
    } else {
        sm = build_traffic_safety(cl, stack, rc.safety, stream_seed(rc.seed, "certify/model"));
        write_file_atomic(a.out / "safety_model.json", dump_json(sm.to_json()));
    }
    std::vector<bool> modes;
    if (filter != "off") modes.push_back(true);
    if (filter != "on") modes.push_back(false);
    Json metrics;
    metrics["seeds"] = rc.seeds;
    metrics["episodes_per_seed"] = cl.episodes;
    metrics["episode_ticks"] = cl.episode_ticks;
    metrics["policy"] = traffic_policy_name(cl.policy);
    std::vector<std::vector<ClosedLoopMetrics>> all(modes.size());
    for (std::size_t mi = 0; mi < modes.size(); ++mi) {
        ClosedLoopConfig run = cl;
        run.filter = modes[mi];
        for (std::size_t k = 0; k < rc.seeds; ++k) {
            run.record_trajectory = mi == 0 && k == 0;
            auto res = run_closed_loop(run, stack, &sm, stream_seed(rc.seed, "simulate/" + std::to_string(k)));
            if (res.trajectory) write_csv(a.out / "trajectory.csv", *res.trajectory);
            all[mi].push_back(res.metrics);
        }
        metrics[modes[mi] ? "filter_on" : "filter_off"] = summarize(all[mi]);
        const Json& s = metrics[modes[mi] ? "filter_on" : "filter_off"];
        out << "filter " << (modes[mi] ? "on " : "off") << ": safety " << s["safety_pct"]["mean"].get<double>()
            << "% +/- " << s["safety_pct"]["ci95"].get<double>() << ", violations/ep "
            << s["violations_per_episode"]["mean"].get<double>() << ", rho_Lyap " << s["rho_lyap"]["mean"].get<double>()
            << ", reward " << s["mean_reward"]["mean"].get<double>() << "\n";
    }
    if (modes.size() == 2) {
        std::size_t safety_ok = 0, viol_ok = 0;
        for (std::size_t k = 0; k < rc.seeds; ++k) {
            safety_ok += all[0][k].safety_pct >= all[1][k].safety_pct;
            viol_ok += all[0][k].violations_per_episode <= all[1][k].violations_per_episode;
        }
        Json paired;
        paired["safety_on_ge_off"] = safety_ok;
        paired["violations_on_le_off"] = viol_ok;
        paired["seeds"] = rc.seeds;
        metrics["paired"] = paired;
        out << "paired seeds with safety(on) >= safety(off): " << safety_ok << "/" << rc.seeds << "\n";
    }
    write_file_atomic(a.out / "metrics.json", dump_json(metrics));
    write_config(a.out, rc);
    return kExitOk;
}

int cmd_audit(const CommonArgs& a, const fs::path& pvalues, const std::optional<fs::path>& data,
              const std::optional<fs::path>& mask, std::ostream& out) {
    RunConfig rc = resolve(a, {});
    require_file(pvalues);
    const Panel pv = long_to_panel(read_csv(pvalues), "value");
    SimConfig sc = rc.sim;
    std::optional<Panel> truth;
    std::size_t t0 = 0;
    if (data) {
        const Dataset d = load_data(*data);
        sc = d.config;
        t0 = d.splits.test_begin;
        if (d.splits.test_begin + pv.steps <= d.steps && d.observations.nodes == pv.nodes) {
            truth = d.anomaly_mask.slice(t0, t0 + pv.steps);
        }
    }
    if (mask) {
        require_file(*mask);
        truth = long_to_panel(read_csv(*mask), "is_anomaly");
    }
    const TrafficSim sim = layout_sim(sc);
    if (sim.cell_graph().node_count() != pv.nodes) {
        throw std::invalid_argument("p-value panel width does not match the sim layout");
    }
    if (truth && (truth->steps != pv.steps || truth->nodes != pv.nodes)) {
        throw std::invalid_argument("anomaly mask shape does not match the p-value panel");
    }
    BootstrapConfig bc = rc.audit;
    bc.seed = stream_seed(rc.seed, "audit");
    const auto rep = block_bootstrap_verify(pv, truth, sim.cell_graph(), bc);
    write_file_atomic(a.out / "dependence_report.json", dump_json(rep.to_json()));
    write_config(a.out, rc);
    for (const auto& b : rep.blocks) {
        out << "b_t " << b.time_block << " b_s " << b.space_hops << ": rho " << b.rho_block << ", FDR BH "
            << b.fdr_mean_bh << " BY " << b.fdr_mean_by << " (q95 " << b.fdr_q95_by << ")\n";
    }
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    init_logging();
    CLI::App app{"Uncertainty-aware traffic forecasting, anomaly detection and safe control"};
    app.require_subcommand(1);
    CommonArgs common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", common.config, "JSON run config");
        sub->add_option("--seed", common.seed, "Master seed");
        sub->add_option("--out", common.out, "Existing output directory")->required();
        sub->add_option("--set", common.overrides, "Override section.key=value")->take_all();
    };
    std::optional<std::size_t> steps;
    fs::path data, model, pvalues;
    std::optional<fs::path> data_opt, model_opt, mask_opt;
    bool toy = false;
    std::string filter = "both";
    std::optional<std::size_t> seeds;

    auto* gen = app.add_subcommand("generate", "Simulate a dataset");
    add_common(gen);
    gen->add_option("--steps", steps, "Observation rows");
    auto* cal = app.add_subcommand("calibrate", "Fit the forecaster and conformal ledger");
    add_common(cal);
    cal->add_option("--data", data, "Dataset directory")->required();
    auto* det = app.add_subcommand("detect", "Score the test block and run BY and BH");
    add_common(det);
    det->add_option("--data", data, "Dataset directory")->required();
    det->add_option("--model", model, "Directory with detector.json")->required();
    auto* cert = app.add_subcommand("certify", "Fit the world model and run the safety certificate");
    add_common(cert);
    cert->add_option("--data", data_opt, "Dataset directory");
    cert->add_option("--model", model_opt, "Directory with detector.json");
    cert->add_flag("--toy", toy, "Certify the two-queue toy system instead");
    auto* sim = app.add_subcommand("simulate", "Closed-loop runs with and without the safety filter");
    add_common(sim);
    sim->add_option("--data", data, "Dataset directory")->required();
    sim->add_option("--model", model, "Directory with detector.json and optionally safety_model.json")->required();
    sim->add_option("--seeds", seeds, "Number of seeds");
    sim->add_option("--filter", filter, "on, off or both");
    auto* aud = app.add_subcommand("audit-fdr", "Block-bootstrap FDR audit of a p-value panel");
    add_common(aud);
    aud->add_option("--pvalues", pvalues, "pvalues.csv from detect")->required();
    aud->add_option("--data", data_opt, "Dataset directory for layout and anomaly mask");
    aud->add_option("--mask", mask_opt, "Anomaly mask CSV aligned with the p-values");

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    try {
        if (*gen) return cmd_generate(common, steps, out);
        if (*cal) return cmd_calibrate(common, data, out);
        if (*det) return cmd_detect(common, data, model, out);
        if (*cert) return cmd_certify(common, data_opt, model_opt, toy, out);
        if (*sim) {
            if (seeds) common.overrides.push_back("simulate.seeds=" + std::to_string(*seeds));
            return cmd_simulate(common, data, model, filter, out);
        }
        if (*aud) return cmd_audit(common, pvalues, data_opt, mask_opt, out);
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitConfig;
}

}  // namespace tuq
