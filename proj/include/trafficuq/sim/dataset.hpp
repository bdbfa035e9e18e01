#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "trafficuq/common/io.hpp"
#include "trafficuq/common/panel.hpp"
#include "trafficuq/sim/traffic_sim.hpp"

namespace tuq {

/// Row ranges [begin, end) of a generated panel. The fit block trains the
/// forecaster, validation residuals drive clustering, calibration residuals
/// feed the conformal quantiles and the test block starts tau_gap rows after
/// calibration ends.
struct DatasetSplits {
    std::size_t fit_end = 0;
    std::size_t val_begin = 0;
    std::size_t val_end = 0;
    std::size_t cal_begin = 0;
    std::size_t cal_end = 0;
    std::size_t test_begin = 0;
    std::size_t test_end = 0;

    Json to_json() const;
    static DatasetSplits from_json(const Json& j);
};

/// 60 / 20 / 20 with the first sixth of the training share held out for
/// validation. Throws std::invalid_argument when any block would be empty.
DatasetSplits make_splits(std::size_t steps, std::size_t tau_gap, std::size_t min_history);

struct AnomalyEvent {
    std::size_t row = 0;
    std::size_t intersection = 0;
    AnomalyKind kind = AnomalyKind::DemandSurge;
    double magnitude = 1.0;
    std::size_t duration_rows = 0;
};

/// Starts anomalies at the beginning of observation rows. Each idle
/// intersection starts one with probability rate / duration, so about `rate`
/// of intersection-rows are affected; kinds alternate at random.
class AnomalyScheduler {
public:
    AnomalyScheduler(const SimConfig& cfg, std::size_t first_row);

    void on_row(TrafficSim& sim, std::size_t row, std::vector<AnomalyEvent>* events = nullptr);

private:
    SimConfig cfg_;
    std::size_t first_row_;
    Rng rng_;
    std::vector<std::size_t> busy_until_;
};

struct Dataset {
    SimConfig config;
    std::size_t steps = 0;
    Panel observations;  // rows x cells, vehicles per observation interval
    Panel anomaly_mask;  // 1 where an anomaly footprint covers the cell
    std::vector<AnomalyEvent> events;
    DatasetSplits splits;

    /// Config, splits, events and layout summary (panels go to CSV).
    Json metadata() const;
};

/// Runs the simulator under the queue-pressure controller for `steps`
/// observation rows, injecting anomalies at the configured rate.
Dataset generate_dataset(const SimConfig& cfg, std::size_t steps, std::size_t tau_gap = 24,
                         std::size_t min_history = 96);

/// observations.csv, anomaly_mask.csv and dataset.json into an existing directory.
void write_dataset(const Dataset& d, const std::filesystem::path& dir);
Dataset read_dataset(const std::filesystem::path& dir);

/// Green share proportional to the north-south share of the queue; 0.5 when idle.
std::vector<double> queue_pressure_action(const TrafficSim& sim, double lo = 0.1, double hi = 0.9);

}  // namespace tuq
