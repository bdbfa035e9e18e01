#include "trafficuq/sim/dataset.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "trafficuq/common/csv.hpp"

namespace tuq {

Json DatasetSplits::to_json() const {
    Json j;
    j["fit_end"] = fit_end;
    j["val_begin"] = val_begin;
    j["val_end"] = val_end;
    j["cal_begin"] = cal_begin;
    j["cal_end"] = cal_end;
    j["test_begin"] = test_begin;
    j["test_end"] = test_end;
    return j;
}

DatasetSplits DatasetSplits::from_json(const Json& j) {
    DatasetSplits s;
    s.fit_end = j.at("fit_end").get<std::size_t>();
    s.val_begin = j.at("val_begin").get<std::size_t>();
    s.val_end = j.at("val_end").get<std::size_t>();
    s.cal_begin = j.at("cal_begin").get<std::size_t>();
    s.cal_end = j.at("cal_end").get<std::size_t>();
    s.test_begin = j.at("test_begin").get<std::size_t>();
    s.test_end = j.at("test_end").get<std::size_t>();
    return s;
}

DatasetSplits make_splits(std::size_t steps, std::size_t tau_gap, std::size_t min_history) {
    DatasetSplits s;
    const std::size_t train = steps * 6 / 10;
    s.fit_end = steps / 2;
    s.val_begin = std::max(s.fit_end, min_history);
    s.val_end = train;
    s.cal_begin = train;
    s.cal_end = steps * 8 / 10;
    s.test_begin = s.cal_end + tau_gap;
    s.test_end = steps;
    if (s.fit_end <= min_history + 1) {
        throw std::invalid_argument("dataset: too few rows to fit a forecaster with the required history");
    }
    if (s.val_begin >= s.val_end || s.cal_begin >= s.cal_end) {
        throw std::invalid_argument("dataset: validation or calibration block is empty");
    }
    if (s.test_begin >= s.test_end) {
        throw std::invalid_argument("dataset: test block is empty after the calibration gap");
    }
    return s;
}

std::vector<double> queue_pressure_action(const TrafficSim& sim, double lo, double hi) {
    std::vector<double> a;
    a.reserve(sim.intersections().size());
    for (const auto& node : sim.intersections()) {
        const auto total = node.ns.queue + node.ew.queue;
        const double share = total > 0 ? static_cast<double>(node.ns.queue) / static_cast<double>(total) : 0.5;
        a.push_back(std::clamp(share, lo, hi));
    }
    return a;
}

AnomalyScheduler::AnomalyScheduler(const SimConfig& cfg, std::size_t first_row)
    : cfg_(cfg), first_row_(first_row), rng_(make_rng(cfg.seed, "sim/anomaly_schedule")),
      busy_until_(cfg.intersections(), 0) {}

void AnomalyScheduler::on_row(TrafficSim& sim, std::size_t row, std::vector<AnomalyEvent>* events) {
    if (cfg_.deterministic || cfg_.anomaly_rate <= 0.0 || row < first_row_) return;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double p_start = cfg_.anomaly_rate / static_cast<double>(cfg_.anomaly_duration);
    for (std::size_t j = 0; j < busy_until_.size(); ++j) {
        if (row < busy_until_[j] || unif(rng_) >= p_start) continue;
        const auto kind = unif(rng_) < 0.5 ? AnomalyKind::DemandSurge : AnomalyKind::CapacityDrop;
        const double mag = kind == AnomalyKind::DemandSurge ? cfg_.surge_magnitude : cfg_.capacity_drop_magnitude;
        sim.inject_anomaly(j, kind, mag, cfg_.anomaly_duration * cfg_.obs_interval);
        if (events) events->push_back({row, j, kind, mag, cfg_.anomaly_duration});
        busy_until_[j] = row + cfg_.anomaly_duration;
    }
}

Dataset generate_dataset(const SimConfig& cfg, std::size_t steps, std::size_t tau_gap, std::size_t min_history) {
    Dataset d;
    d.config = cfg;
    d.steps = steps;
    d.splits = make_splits(steps, tau_gap, min_history);
    TrafficSim sim(cfg);
    const std::size_t C = sim.coverage().cells.size();
    d.observations = Panel(steps, C);
    d.anomaly_mask = Panel(steps, C);
    AnomalyScheduler scheduler(cfg, min_history);
    for (std::size_t row = 0; row < steps; ++row) {
        scheduler.on_row(sim, row, &d.events);
        for (const auto& a : sim.active_anomalies()) {
            for (auto i : sim.anomaly_footprint(a.intersection)) d.anomaly_mask.at(row, i) = 1.0;
        }
        for (std::size_t k = 0; k < cfg.obs_interval; ++k) {
            const auto action = queue_pressure_action(sim);
            sim.step(action);
        }
        const auto obs = sim.take_observation();
        std::copy(obs.begin(), obs.end(), d.observations.row(row).begin());
    }
    return d;
}

Json Dataset::metadata() const {
    Json j;
    j["format"] = "trafficuq-dataset";
    j["version"] = 1;
    j["steps"] = steps;
    j["cells"] = observations.nodes;
    j["sim"] = config.to_json();
    j["splits"] = splits.to_json();
    Json ev = Json::array();
    for (const auto& e : events) {
        Json x;
        x["row"] = e.row;
        x["intersection"] = e.intersection;
        x["kind"] = anomaly_kind_name(e.kind);
        x["magnitude"] = e.magnitude;
        x["duration_rows"] = e.duration_rows;
        ev.push_back(x);
    }
    j["events"] = ev;
    return j;
}

void write_dataset(const Dataset& d, const std::filesystem::path& dir) {
    write_csv(dir / "observations.csv", panel_to_long(d.observations, "value"));
    write_csv(dir / "anomaly_mask.csv", panel_to_long(d.anomaly_mask, "is_anomaly"));
    write_file_atomic(dir / "dataset.json", dump_json(d.metadata()));
}

Dataset read_dataset(const std::filesystem::path& dir) {
    const Json meta = read_json(dir / "dataset.json");
    if (meta.value("format", "") != "trafficuq-dataset") {
        throw std::invalid_argument("not a trafficuq dataset: " + (dir / "dataset.json").string());
    }
    Dataset d;
    d.config = SimConfig::from_json(meta.at("sim"));
    d.steps = meta.at("steps").get<std::size_t>();
    d.splits = DatasetSplits::from_json(meta.at("splits"));
    d.observations = long_to_panel(read_csv(dir / "observations.csv"), "value");
    d.anomaly_mask = long_to_panel(read_csv(dir / "anomaly_mask.csv"), "is_anomaly");
    if (d.observations.steps != d.steps || d.anomaly_mask.steps != d.steps ||
        d.anomaly_mask.nodes != d.observations.nodes) {
        throw std::invalid_argument("dataset panels do not match dataset.json");
    }
    for (const auto& e : meta.at("events")) {
        AnomalyEvent ev;
        ev.row = e.at("row").get<std::size_t>();
        ev.intersection = e.at("intersection").get<std::size_t>();
        ev.kind = e.at("kind").get<std::string>() == "demand_surge" ? AnomalyKind::DemandSurge : AnomalyKind::CapacityDrop;
        ev.magnitude = e.at("magnitude").get<double>();
        ev.duration_rows = e.at("duration_rows").get<std::size_t>();
        d.events.push_back(ev);
    }
    return d;
}

}  // namespace tuq
