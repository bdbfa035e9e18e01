#include "trafficuq/sim/closed_loop.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "trafficuq/sim/dataset.hpp"

namespace tuq {

TrafficPolicy parse_traffic_policy(const std::string& name) {
    if (name == "queue_pressure") return TrafficPolicy::QueuePressure;
    if (name == "fixed") return TrafficPolicy::Fixed;
    if (name == "random") return TrafficPolicy::Random;
    if (name == "exploratory") return TrafficPolicy::Exploratory;
    throw std::invalid_argument("unknown policy: " + name);
}

std::string traffic_policy_name(TrafficPolicy p) {
    switch (p) {
        case TrafficPolicy::QueuePressure: return "queue_pressure";
        case TrafficPolicy::Fixed: return "fixed";
        case TrafficPolicy::Random: return "random";
        case TrafficPolicy::Exploratory: return "exploratory";
    }
    return "queue_pressure";
}

Json ClosedLoopConfig::to_json() const {
    Json j;
    j["sim"] = sim.to_json();
    j["episodes"] = episodes;
    j["episode_ticks"] = episode_ticks;
    j["start_hour"] = start_hour;
    j["policy"] = traffic_policy_name(policy);
    j["filter"] = filter;
    j["explore"] = explore;
    j["exploration_mode"] = exploration_mode == ExplorationMode::Sigmoid ? "sigmoid" : "gaussian";
    j["exploration_w"] = exploration.w;
    j["exploration_b"] = exploration.b;
    j["exploration_beta"] = exploration.beta;
    j["d_queue"] = constraints.d_queue;
    j["d_wait"] = constraints.d_wait;
    j["d_through"] = constraints.d_through;
    j["lambda_p"] = reward.lambda_p;
    j["lambda_sigma"] = reward.lambda_sigma;
    j["lambda_c"] = reward.lambda_c;
    return j;
}

ClosedLoopConfig ClosedLoopConfig::from_json(const Json& j) {
    ClosedLoopConfig c;
    const Json defaults = c.to_json();
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("unknown closed-loop key: " + key);
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    if (j.contains("sim")) c.sim = SimConfig::from_json(j.at("sim"));
    get("episodes", c.episodes);
    get("episode_ticks", c.episode_ticks);
    get("start_hour", c.start_hour);
    if (j.contains("policy")) c.policy = parse_traffic_policy(j.at("policy").get<std::string>());
    get("filter", c.filter);
    get("explore", c.explore);
    if (j.contains("exploration_mode")) {
        c.exploration_mode = parse_exploration_mode(j.at("exploration_mode").get<std::string>());
    }
    get("exploration_w", c.exploration.w);
    get("exploration_b", c.exploration.b);
    get("exploration_beta", c.exploration.beta);
    get("d_queue", c.constraints.d_queue);
    get("d_wait", c.constraints.d_wait);
    get("d_through", c.constraints.d_through);
    get("lambda_p", c.reward.lambda_p);
    get("lambda_sigma", c.reward.lambda_sigma);
    get("lambda_c", c.reward.lambda_c);
    if (c.episodes == 0 || c.episode_ticks == 0) {
        throw std::invalid_argument("closed loop: episodes and episode_ticks must be positive");
    }
    if (c.start_hour >= 24) {
        throw std::invalid_argument("closed loop: start_hour must lie in [0, 24)");
    }
    c.constraints.validate();
    return c;
}

LinearConstraints traffic_constraints(const ControlStateLayout& layout, const ConstraintSpec& spec,
                                      double theta_base) {
    const auto n = layout.intersections;
    const auto ds = static_cast<Eigen::Index>(layout.dim());
    LinearConstraints c;
    for (std::size_t j = 0; j < n; ++j) {
        Eigen::VectorXd q = Eigen::VectorXd::Zero(ds);
        q(static_cast<Eigen::Index>(4 * j)) = 1.0 / spec.d_queue;
        q(static_cast<Eigen::Index>(4 * j + 1)) = 1.0 / spec.d_queue;
        c.rows.push_back({q, 1.0, 1.0, "queue_" + std::to_string(j)});
    }
    for (std::size_t j = 0; j < n; ++j) {
        Eigen::VectorXd w = Eigen::VectorXd::Zero(ds);
        w(static_cast<Eigen::Index>(4 * j + 2)) = 1.0 / spec.d_wait;
        c.rows.push_back({w, 1.0, 1.0, "wait_" + std::to_string(j)});
    }
    const double floor = spec.d_through * theta_base;
    if (floor > 0.0) {
        Eigen::VectorXd t = Eigen::VectorXd::Zero(ds);
        for (std::size_t j = 0; j < n; ++j) t(static_cast<Eigen::Index>(4 * j + 3)) = 1.0 / floor;
        c.rows.push_back({t, 1.0, -1.0, "throughput"});
    }
    return c;
}

LyapunovParams traffic_lyapunov(const ControlStateLayout& layout, const ConstraintSpec& spec,
                                const Eigen::VectorXd& s_safe) {
    const auto ds = static_cast<Eigen::Index>(layout.dim());
    if (s_safe.size() != ds) {
        throw std::invalid_argument("traffic_lyapunov: s_safe has the wrong dimension");
    }
    Eigen::VectorXd diag = Eigen::VectorXd::Constant(ds, 1e-6);
    for (std::size_t j = 0; j < layout.intersections; ++j) {
        diag(static_cast<Eigen::Index>(4 * j)) = 1.0 / (spec.d_queue * spec.d_queue);
        diag(static_cast<Eigen::Index>(4 * j + 1)) = 1.0 / (spec.d_queue * spec.d_queue);
        diag(static_cast<Eigen::Index>(4 * j + 2)) = 1.0 / (spec.d_wait * spec.d_wait);
    }
    LyapunovParams p;
    p.A = Eigen::MatrixXd::Zero(0, ds);
    p.eta = 1.0;
    p.Q = diag.asDiagonal();
    p.s_safe = s_safe;
    p.validate();
    return p;
}

Json TrafficSafetyModel::to_json() const {
    Json j;
    j["format"] = "trafficuq-safety-model";
    j["version"] = 1;
    j["ensemble"] = ensemble.to_json();
    j["lyapunov"] = lyapunov.to_json();
    Json f;
    f["kappa"] = filter.kappa;
    f["delta_slack"] = filter.delta_slack;
    f["n_proj"] = filter.n_proj;
    f["step"] = filter.step;
    f["penalty"] = filter.penalty;
    f["fd_relative"] = filter.fd_relative;
    f["mode"] = filter.mode == ExpectationMode::EnsembleMean ? "ensemble_mean" : "member_mean";
    j["filter"] = f;
    j["domain_radius"] = domain_radius;
    Json b;
    b["L_L"] = bounds.L_L;
    b["J_W"] = bounds.J_W;
    b["feature_sup"] = bounds.feature_sup;
    b["domain_radius"] = bounds.domain_radius;
    j["bounds"] = b;
    return j;
}

TrafficSafetyModel TrafficSafetyModel::from_json(const Json& j) {
    if (j.value("format", "") != "trafficuq-safety-model") {
        throw std::invalid_argument("not a trafficuq safety model document");
    }
    TrafficSafetyModel m;
    m.ensemble = WorldModelEnsemble::from_json(j.at("ensemble"));
    m.lyapunov = LyapunovParams::from_json(j.at("lyapunov"));
    const Json& f = j.at("filter");
    m.filter.kappa = f.at("kappa").get<double>();
    m.filter.delta_slack = f.at("delta_slack").get<double>();
    m.filter.n_proj = f.at("n_proj").get<std::size_t>();
    m.filter.step = f.at("step").get<double>();
    m.filter.penalty = f.at("penalty").get<double>();
    m.filter.fd_relative = f.at("fd_relative").get<double>();
    m.filter.mode = f.at("mode").get<std::string>() == "member_mean" ? ExpectationMode::MemberMean
                                                                     : ExpectationMode::EnsembleMean;
    m.domain_radius = j.at("domain_radius").get<double>();
    const Json& b = j.at("bounds");
    m.bounds.L_L = b.at("L_L").get<double>();
    m.bounds.J_W = b.at("J_W").get<double>();
    m.bounds.feature_sup = b.at("feature_sup").get<double>();
    m.bounds.domain_radius = b.at("domain_radius").get<double>();
    return m;
}

Json ClosedLoopMetrics::to_json() const {
    Json j;
    j["episodes"] = episodes;
    j["steps"] = steps;
    j["safety_pct"] = safety_pct;
    j["violations_per_episode"] = violations_per_episode;
    j["rho_lyap"] = rho_lyap;
    j["mean_reward"] = mean_reward;
    j["mean_dc"] = mean_dc;
    j["mean_state_norm"] = mean_state_norm;
    j["projections"] = projections;
    j["episode_violations"] = episode_violations;
    return j;
}

namespace {

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

Eigen::VectorXd default_s_safe(const ControlStateLayout& layout) { return Eigen::VectorXd::Zero(layout.dim()); }

}  // namespace

ClosedLoopResult run_closed_loop(const ClosedLoopConfig& cfg, const DetectionStack& stack,
                                 const TrafficSafetyModel* safety, std::uint64_t seed) {
    SimConfig sc = cfg.sim;
    sc.seed = seed;
    TrafficSim sim(sc);
    const std::size_t J = sim.intersections().size();
    const std::size_t C = sim.coverage().cell_count();
    const ControlStateLayout layout{J};
    const auto ds = static_cast<Eigen::Index>(layout.dim());
    const auto da = static_cast<Eigen::Index>(J);
    if (stack.coverage.cell_count() != C || stack.coverage.intersection_count() != J) {
        throw std::invalid_argument("closed loop: detector layout does not match the simulator");
    }
    if (safety && (safety->ensemble.state_dim != layout.dim() || safety->ensemble.action_dim != J)) {
        throw std::invalid_argument("closed loop: safety model dimensions do not match the control state");
    }
    if (cfg.filter && !safety) {
        throw std::invalid_argument("closed loop: filter requested without a safety model");
    }

    const std::size_t obs = sc.obs_interval;
    const std::size_t rows_per_hour = std::max<std::size_t>(1, sc.rows_per_day() / 24);
    const std::size_t warmup = sc.rows_per_day() + cfg.start_hour * rows_per_hour;
    Pipeline pipeline(stack);
    if (warmup <= pipeline.min_history()) {
        throw std::invalid_argument("closed loop: warm-up shorter than the forecaster history");
    }
    const std::size_t total_ticks = cfg.episodes * cfg.episode_ticks;
    Panel y(warmup + total_ticks / obs + 2, C);
    AnomalyScheduler scheduler(sc, pipeline.min_history());
    Rng policy_rng = make_rng(seed, "closed_loop/policy");
    Rng explore_rng = make_rng(seed, "closed_loop/explore");

    PipelineStep latest;
    std::size_t row = 0;
    auto finish_row = [&] {
        const auto o = sim.take_observation();
        std::copy(o.begin(), o.end(), y.row(row).begin());
        if (row >= pipeline.min_history()) latest = pipeline.observe(y, row);
        ++row;
    };
    for (; row < warmup;) {
        scheduler.on_row(sim, row);
        for (std::size_t k = 0; k < obs; ++k) sim.step(queue_pressure_action(sim));
        finish_row();
    }

    auto state = [&] {
        std::vector<double> local;
        local.reserve(4 * J);
        for (const auto& m : sim.local_measurements()) {
            local.insert(local.end(), {m.queue_ns, m.queue_ew, m.wait_s, m.throughput});
        }
        return assemble_state(local, latest.mu_int, latest.sigma_int, latest.p_int, latest.flags,
                              clock_encoding(sim.tick(), sc.ticks_per_day()), layout);
    };
    const LyapunovParams lyap =
        safety ? safety->lyapunov : traffic_lyapunov(layout, cfg.constraints, default_s_safe(layout));
    std::optional<SafetyFilter> filter;
    const Eigen::VectorXd lower = Eigen::VectorXd::Zero(da), upper = Eigen::VectorXd::Ones(da);
    if (cfg.filter) {
        filter.emplace(safety->ensemble, safety->lyapunov,
                       traffic_constraints(layout, cfg.constraints, sim.theta_base(sim.tick())), safety->filter,
                       lower, upper);
    }

    ClosedLoopResult res;
    auto& m = res.metrics;
    m.episodes = cfg.episodes;
    m.steps = total_ticks;
    m.episode_violations.assign(cfg.episodes, 0);
    if (cfg.record_trajectory) {
        CsvTable t;
        t.header.push_back("t");
        for (const auto& name : layout.names()) t.header.push_back(name);
        for (std::size_t j = 0; j < J; ++j) t.header.push_back("action_" + std::to_string(j));
        t.header.insert(t.header.end(), {"r", "d_C", "L"});
        res.trajectory = std::move(t);
    }

    Eigen::VectorXd s = state();
    std::vector<double> L_trace{lyapunov_value(s, lyap)};
    std::vector<double> rewards, dcs, norms;
    rewards.reserve(total_ticks);
    double prev_dc = 0.0;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t k = 0; k < total_ticks; ++k) {
        if (sim.tick() % obs == 0) scheduler.on_row(sim, row);
        Eigen::VectorXd a(da);
        switch (cfg.policy) {
            case TrafficPolicy::QueuePressure:
            case TrafficPolicy::Exploratory: {
                const auto qp = queue_pressure_action(sim);
                for (Eigen::Index j = 0; j < da; ++j) a(j) = qp[static_cast<std::size_t>(j)];
                if (cfg.policy == TrafficPolicy::Exploratory) {
                    for (Eigen::Index j = 0; j < da; ++j) a(j) = std::clamp(a(j) + 0.8 * (unif(policy_rng) - 0.5), 0.0, 1.0);
                }
                break;
            }
            case TrafficPolicy::Fixed: a.setConstant(0.5); break;
            case TrafficPolicy::Random:
                for (Eigen::Index j = 0; j < da; ++j) a(j) = unif(policy_rng);
                break;
        }
        if (cfg.explore) {
            const double mu_bar = std::max(mean_of(latest.mu_int), 1.0);
            const double sigma_f = mean_of(latest.sigma_int) / mu_bar;
            const double p_anom = 1.0 - *std::min_element(latest.p_int.begin(), latest.p_int.end());
            double sigma_w = 0.0;
            if (safety) sigma_w = ensemble_predict(safety->ensemble, s, a).second.mean();
            if (cfg.exploration_mode == ExplorationMode::Sigmoid) {
                if (unif(explore_rng) < exploration_prob(sigma_f, p_anom, sigma_w, cfg.exploration)) {
                    for (Eigen::Index j = 0; j < da; ++j) a(j) = unif(explore_rng);
                }
            } else {
                a = exploration_noise(a, sigma_f, cfg.exploration, lower, upper, explore_rng);
            }
        }
        if (filter) {
            filter->set_constraints(traffic_constraints(layout, cfg.constraints, sim.theta_base(sim.tick())));
            const auto pr = filter->apply(s, a);
            m.projections += pr.projected;
            a = pr.action;
        }
        std::vector<double> act(a.data(), a.data() + da);
        sim.step(act);
        if (sim.tick() % obs == 0) finish_row();
        const Eigen::VectorXd s_next = state();
        const double dc =
            traffic_constraints(layout, cfg.constraints, sim.theta_base(sim.tick())).violation(s_next);
        const double L = lyapunov_value(s_next, lyap);
        double queue = 0.0;
        for (std::size_t j = 0; j < J; ++j) queue += s_next(static_cast<Eigen::Index>(4 * j)) + s_next(static_cast<Eigen::Index>(4 * j + 1));
        const double r_traffic = -queue / (static_cast<double>(J) * cfg.constraints.d_queue);
        const double p_before = s.segment(static_cast<Eigen::Index>(layout.p_offset()), da).mean();
        const double p_after = s_next.segment(static_cast<Eigen::Index>(layout.p_offset()), da).mean();
        const double sigma_bar = s_next.segment(static_cast<Eigen::Index>(layout.sigma_offset()), da).mean() /
                                 std::max(s_next.segment(static_cast<Eigen::Index>(layout.mu_offset()), da).mean(), 1.0);
        const double r = anomaly_reward(r_traffic, p_before, p_after, sigma_bar, dc, cfg.reward);
        const std::size_t ep = k / cfg.episode_ticks;
        if (dc > 0.0 && (k % cfg.episode_ticks == 0 || prev_dc == 0.0)) ++m.episode_violations[ep];
        prev_dc = dc;
        rewards.push_back(r);
        dcs.push_back(dc);
        norms.push_back(s_next.norm());
        L_trace.push_back(L);
        if (cfg.record_transitions) res.transitions.push_back({s, a, s_next});
        if (res.trajectory) {
            std::vector<double> line;
            line.reserve(res.trajectory->header.size());
            line.push_back(static_cast<double>(k));
            line.insert(line.end(), s_next.data(), s_next.data() + ds);
            line.insert(line.end(), act.begin(), act.end());
            line.insert(line.end(), {r, dc, L});
            res.trajectory->rows.push_back(std::move(line));
        }
        s = s_next;
    }
    std::size_t safe = 0, onsets = 0;
    for (auto v : m.episode_violations) {
        safe += v == 0;
        onsets += v;
    }
    m.safety_pct = 100.0 * static_cast<double>(safe) / static_cast<double>(cfg.episodes);
    m.violations_per_episode = static_cast<double>(onsets) / static_cast<double>(cfg.episodes);
    m.rho_lyap = lyapunov_decrease_rate(L_trace);
    m.mean_reward = mean_of(rewards);
    m.mean_dc = mean_of(dcs);
    m.mean_state_norm = mean_of(norms);
    return res;
}

TrafficSafetyModel build_traffic_safety(const ClosedLoopConfig& cfg, const DetectionStack& stack,
                                        const SafetyModelOptions& opts, std::uint64_t seed) {
    if (!(opts.holdout > 0.0 && opts.holdout < 1.0) || opts.collect_episodes == 0) {
        throw std::invalid_argument("safety model: holdout must lie in (0, 1) and collection must be nonempty");
    }
    ClosedLoopConfig collect = cfg;
    collect.policy = TrafficPolicy::Exploratory;
    collect.filter = false;
    collect.explore = false;
    collect.episodes = opts.collect_episodes;
    collect.record_transitions = true;
    collect.record_trajectory = false;
    auto run = run_closed_loop(collect, stack, nullptr, stream_seed(seed, "safety/collect"));
    auto& data = run.transitions;
    const auto n_hold = std::max<std::size_t>(1, static_cast<std::size_t>(opts.holdout * static_cast<double>(data.size())));
    std::vector<Transition> train(data.begin(), data.end() - static_cast<std::ptrdiff_t>(n_hold));
    std::vector<Transition> hold(data.end() - static_cast<std::ptrdiff_t>(n_hold), data.end());

    TrafficSafetyModel m;
    m.filter = opts.filter;
    m.ensemble = fit_world_ensemble(train, opts.members, stream_seed(seed, "safety/ensemble"));
    m.ensemble.eps_model = model_error(m.ensemble, hold, m.ensemble.eps_floor);

    const ControlStateLayout layout{cfg.sim.intersections()};
    Eigen::VectorXd s_safe = Eigen::VectorXd::Zero(layout.dim());
    for (const auto& t : train) s_safe += t.s;
    s_safe /= static_cast<double>(train.size());
    for (std::size_t j = 0; j < layout.intersections; ++j) {
        for (std::size_t k = 0; k < 3; ++k) s_safe(static_cast<Eigen::Index>(4 * j + k)) = 0.0;
    }
    m.lyapunov = traffic_lyapunov(layout, cfg.constraints, s_safe);
    double radius = 0.0;
    for (const auto& t : data) radius = std::max({radius, (t.s - s_safe).norm(), (t.s_next - s_safe).norm()});
    m.domain_radius = 1.1 * radius;
    m.bounds = lipschitz_bounds(m.lyapunov, m.ensemble, m.domain_radius);
    return m;
}

SafetyCertificate certify_traffic(const ClosedLoopConfig& cfg, const DetectionStack& stack,
                                  const TrafficSafetyModel& model, std::uint64_t seed, std::size_t max_rounds) {
    ClosedLoopConfig run_cfg = cfg;
    run_cfg.filter = true;
    run_cfg.record_trajectory = false;
    run_cfg.record_transitions = false;
    auto rollout = [&](std::size_t round) {
        const auto r = run_closed_loop(run_cfg, stack, &model, seed + round);
        return RolloutStats{r.metrics.mean_dc, r.metrics.mean_state_norm};
    };
    return iterative_certificate(rollout, model.ensemble.eps_model, model.bounds.L_L, model.bounds.J_W,
                                 model.filter.delta_slack, model.filter.kappa, max_rounds);
}

}  // namespace tuq
