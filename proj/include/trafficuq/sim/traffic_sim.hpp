#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "trafficuq/common/io.hpp"
#include "trafficuq/common/rng.hpp"
#include "trafficuq/forecast/graph.hpp"
#include "trafficuq/spatial/coverage_map.hpp"

namespace tuq {

struct SimConfig {
    std::size_t grid_n = 4;           // n x n intersections
    double block_km = 1.0;
    std::size_t cell_res = 3;         // cells per block side
    double area_side_km = 0.8;        // coverage square around each intersection
    double tick_seconds = 15.0;
    double base_rate = 1.0;           // mean arrivals per tick per approach
    double daily_amp = 0.5;
    double weekly_amp = 0.15;
    double sat_flow = 6.0;            // departures per tick per approach at full green
    double spill = 0.3;               // share of departures joining the next queue south or east
    double throughput_ema = 0.05;
    double sensor_sd = 2.0;           // vehicles per observation interval
    std::size_t obs_interval = 60;    // ticks per observation row (15 min)
    double anomaly_rate = 0.05;       // expected share of intersection-rows under anomaly
    std::size_t anomaly_duration = 4; // observation rows
    double surge_magnitude = 2.0;
    double capacity_drop_magnitude = 2.0;
    bool deterministic = false;       // no arrival, spill or sensor randomness
    std::uint64_t seed = 0;

    void validate() const;
    std::size_t intersections() const { return grid_n * grid_n; }
    std::size_t cells_per_side() const { return grid_n * cell_res; }
    std::size_t cells() const { return cells_per_side() * cells_per_side(); }
    std::size_t ticks_per_day() const;
    std::size_t rows_per_day() const { return ticks_per_day() / obs_interval; }

    Json to_json() const;
    /// Unknown keys are rejected.
    static SimConfig from_json(const Json& j);
};

enum class AnomalyKind { DemandSurge, CapacityDrop };

std::string anomaly_kind_name(AnomalyKind k);

struct ActiveAnomaly {
    std::size_t intersection = 0;
    AnomalyKind kind = AnomalyKind::DemandSurge;
    double magnitude = 1.0;
    std::size_t ticks_left = 0;
};

struct Cohort {
    std::uint64_t tick = 0;
    std::int64_t count = 0;
};

struct Approach {
    std::deque<Cohort> cohorts;
    std::int64_t queue = 0;
    double credit = 0.0;
    double arrival_acc = 0.5;  // deterministic mode accumulator offset
};

struct IntersectionState {
    Approach ns;
    Approach ew;
    double wait_s = 0.0;
    std::int64_t served = 0;
    double throughput_ema = 0.0;
};

struct StepTotals {
    std::int64_t arrived = 0;  // external arrivals plus spillover entries
    std::int64_t served = 0;   // all departures, including those that spill
    std::int64_t exited = 0;
};

/// Local measurements of one intersection as used by the control state.
struct LocalMeasurement {
    double queue_ns = 0.0;
    double queue_ew = 0.0;
    double wait_s = 0.0;
    double throughput = 0.0;
};

/// Grid of signalized intersections with two FIFO approaches each. The action
/// is the north-south green share; east-west gets the rest.
class TrafficSim {
public:
    explicit TrafficSim(SimConfig cfg);

    StepTotals step(std::span<const double> green_ns);

    /// magnitude > 0; duration in ticks. Surges multiply demand, drops divide capacity.
    void inject_anomaly(std::size_t intersection, AnomalyKind kind, double magnitude, std::size_t duration_ticks);

    /// Expected external arrivals per tick per approach at tick t (before anomalies).
    double demand_rate(std::uint64_t tick) const;
    /// Expected departures per tick summed over the grid, counting repeat
    /// service of spilled vehicles. Baseline for the throughput constraint.
    double theta_base(std::uint64_t tick) const;

    /// Flow counts accumulated since the last observation row, then cleared.
    /// Adds sensor noise unless deterministic.
    std::vector<double> take_observation();

    std::vector<LocalMeasurement> local_measurements() const;
    /// Sum of the per-intersection throughput averages.
    double network_throughput() const;

    std::uint64_t tick() const { return tick_; }
    std::int64_t total_queue() const;
    std::int64_t cumulative_arrived() const { return cum_arrived_; }
    std::int64_t cumulative_served() const { return cum_served_; }
    const std::vector<IntersectionState>& intersections() const { return nodes_; }
    const std::vector<ActiveAnomaly>& active_anomalies() const { return anomalies_; }
    const SimConfig& config() const { return cfg_; }
    const CoverageMap& coverage() const { return coverage_; }
    const GraphTopology& cell_graph() const { return cell_graph_; }
    const GraphTopology& intersection_graph() const { return int_graph_; }

    /// Cells within one cell-grid hop of the cells covering an intersection.
    const std::vector<std::size_t>& anomaly_footprint(std::size_t intersection) const {
        return footprint_[intersection];
    }

private:
    std::int64_t sample_arrivals(Approach& ap, double rate);
    std::int64_t serve(Approach& ap, double capacity, std::uint64_t now);
    static double mean_age_ticks(const Approach& ap, std::uint64_t now);

    SimConfig cfg_;
    std::vector<IntersectionState> nodes_;
    std::vector<ActiveAnomaly> anomalies_;
    double service_multiplier_ = 0.0;
    std::uint64_t tick_ = 0;
    std::int64_t cum_arrived_ = 0;
    std::int64_t cum_served_ = 0;
    std::vector<double> flow_acc_;
    std::vector<std::vector<double>> cell_share_;  // [intersection][cell] overlap / cell area
    CoverageMap coverage_;
    GraphTopology cell_graph_;
    GraphTopology int_graph_;
    std::vector<std::vector<std::size_t>> footprint_;
    Rng arrivals_rng_;
    Rng spill_rng_;
    Rng sensor_rng_;
};

}  // namespace tuq
