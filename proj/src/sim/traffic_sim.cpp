#include "trafficuq/sim/traffic_sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <stdexcept>

namespace tuq {

void SimConfig::validate() const {
    if (grid_n == 0 || cell_res == 0) {
        throw std::invalid_argument("sim config: grid_n and cell_res must be positive");
    }
    if (!(block_km > 0.0) || !(area_side_km > 0.0) || area_side_km > block_km) {
        throw std::invalid_argument("sim config: need 0 < area_side_km <= block_km");
    }
    if (!(tick_seconds > 0.0) || std::fmod(86400.0, tick_seconds) != 0.0) {
        throw std::invalid_argument("sim config: tick_seconds must divide one day");
    }
    if (!(base_rate >= 0.0) || !(sat_flow > 0.0)) {
        throw std::invalid_argument("sim config: need base_rate >= 0 and sat_flow > 0");
    }
    if (daily_amp < 0.0 || daily_amp >= 1.0 || weekly_amp < 0.0 || weekly_amp >= 1.0) {
        throw std::invalid_argument("sim config: amplitudes must lie in [0, 1)");
    }
    if (spill < 0.0 || spill >= 1.0) {
        throw std::invalid_argument("sim config: spill must lie in [0, 1)");
    }
    if (!(throughput_ema > 0.0 && throughput_ema <= 1.0)) {
        throw std::invalid_argument("sim config: throughput_ema must lie in (0, 1]");
    }
    if (sensor_sd < 0.0) {
        throw std::invalid_argument("sim config: sensor_sd must be nonnegative");
    }
    if (obs_interval == 0 || ticks_per_day() % obs_interval != 0) {
        throw std::invalid_argument("sim config: obs_interval must divide the ticks of one day");
    }
    if (anomaly_rate < 0.0 || anomaly_rate > 0.2) {
        throw std::invalid_argument("sim config: anomaly_rate must lie in [0, 0.2]");
    }
    if (anomaly_duration == 0 || !(surge_magnitude > 0.0) || !(capacity_drop_magnitude > 0.0)) {
        throw std::invalid_argument("sim config: anomaly duration and magnitudes must be positive");
    }
}

std::size_t SimConfig::ticks_per_day() const { return static_cast<std::size_t>(86400.0 / tick_seconds); }

Json SimConfig::to_json() const {
    Json j;
    j["grid_n"] = grid_n;
    j["block_km"] = block_km;
    j["cell_res"] = cell_res;
    j["area_side_km"] = area_side_km;
    j["tick_seconds"] = tick_seconds;
    j["base_rate"] = base_rate;
    j["daily_amp"] = daily_amp;
    j["weekly_amp"] = weekly_amp;
    j["sat_flow"] = sat_flow;
    j["spill"] = spill;
    j["throughput_ema"] = throughput_ema;
    j["sensor_sd"] = sensor_sd;
    j["obs_interval"] = obs_interval;
    j["anomaly_rate"] = anomaly_rate;
    j["anomaly_duration"] = anomaly_duration;
    j["surge_magnitude"] = surge_magnitude;
    j["capacity_drop_magnitude"] = capacity_drop_magnitude;
    j["deterministic"] = deterministic;
    j["seed"] = seed;
    return j;
}

SimConfig SimConfig::from_json(const Json& j) {
    SimConfig c;
    const Json defaults = c.to_json();
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) {
            throw std::invalid_argument("unknown sim config key: " + key);
        }
    }
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("grid_n", c.grid_n);
    get("block_km", c.block_km);
    get("cell_res", c.cell_res);
    get("area_side_km", c.area_side_km);
    get("tick_seconds", c.tick_seconds);
    get("base_rate", c.base_rate);
    get("daily_amp", c.daily_amp);
    get("weekly_amp", c.weekly_amp);
    get("sat_flow", c.sat_flow);
    get("spill", c.spill);
    get("throughput_ema", c.throughput_ema);
    get("sensor_sd", c.sensor_sd);
    get("obs_interval", c.obs_interval);
    get("anomaly_rate", c.anomaly_rate);
    get("anomaly_duration", c.anomaly_duration);
    get("surge_magnitude", c.surge_magnitude);
    get("capacity_drop_magnitude", c.capacity_drop_magnitude);
    get("deterministic", c.deterministic);
    get("seed", c.seed);
    c.validate();
    return c;
}

std::string anomaly_kind_name(AnomalyKind k) { return k == AnomalyKind::DemandSurge ? "demand_surge" : "capacity_drop"; }

TrafficSim::TrafficSim(SimConfig cfg)
    : cfg_(std::move(cfg)),
      arrivals_rng_(make_rng(cfg_.seed, "sim/arrivals")),
      spill_rng_(make_rng(cfg_.seed, "sim/spill")),
      sensor_rng_(make_rng(cfg_.seed, "sim/sensor")) {
    cfg_.validate();
    const std::size_t n = cfg_.grid_n;
    const std::size_t side = cfg_.cells_per_side();
    const double cell_km = cfg_.block_km / static_cast<double>(cfg_.cell_res);
    const double origin = -cfg_.block_km / 2.0;
    std::vector<Rect> cells;
    for (std::size_t r = 0; r < side; ++r) {
        for (std::size_t c = 0; c < side; ++c) {
            cells.push_back({origin + static_cast<double>(c) * cell_km, origin + static_cast<double>(r) * cell_km,
                             origin + static_cast<double>(c + 1) * cell_km, origin + static_cast<double>(r + 1) * cell_km});
        }
    }
    std::vector<Rect> areas;
    const double h = cfg_.area_side_km / 2.0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            const double x = static_cast<double>(c) * cfg_.block_km;
            const double y = static_cast<double>(r) * cfg_.block_km;
            areas.push_back({x - h, y - h, x + h, y + h});
        }
    }
    coverage_ = coverage_weights(cells, areas);
    cell_graph_ = grid_topology(side, side, cell_km);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto ctr = cells[i].centre();
        cell_graph_.coords[i] = ctr;
    }
    int_graph_ = grid_topology(n, n, cfg_.block_km);

    cell_share_.assign(areas.size(), std::vector<double>(cells.size(), 0.0));
    footprint_.assign(areas.size(), {});
    for (std::size_t j = 0; j < areas.size(); ++j) {
        std::set<std::size_t> foot;
        for (auto i : coverage_.covered[j]) {
            cell_share_[j][i] = overlap_area(cells[i], areas[j]) / cells[i].area();
            for (auto k : cell_graph_.neighborhoods[i]) foot.insert(k);
        }
        footprint_[j].assign(foot.begin(), foot.end());
    }
    nodes_.resize(areas.size());
    // expected services per tick per unit of external demand: an approach k
    // hops from the north or west edge is visited sum_{i<=k} spill^i times
    service_multiplier_ = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
            double v_ns = 0.0, v_ew = 0.0;
            for (std::size_t k = 0; k <= r; ++k) v_ns += std::pow(cfg_.spill, static_cast<double>(k));
            for (std::size_t k = 0; k <= c; ++k) v_ew += std::pow(cfg_.spill, static_cast<double>(k));
            service_multiplier_ += v_ns + v_ew;
        }
    }
    flow_acc_.assign(cells.size(), 0.0);
}

double TrafficSim::demand_rate(std::uint64_t tick) const {
    const double day_len = static_cast<double>(cfg_.ticks_per_day());
    const double tod = static_cast<double>(tick % cfg_.ticks_per_day()) / day_len;
    const double dow = static_cast<double>(tick % (cfg_.ticks_per_day() * 7)) / (7.0 * day_len);
    const double two_pi = 2.0 * std::numbers::pi;
    // trough near 03:00, peak near 15:00
    return cfg_.base_rate * (1.0 + cfg_.daily_amp * std::sin(two_pi * (tod - 0.375))) *
           (1.0 + cfg_.weekly_amp * std::cos(two_pi * dow));
}

double TrafficSim::theta_base(std::uint64_t tick) const {
    return service_multiplier_ * demand_rate(tick);
}

std::int64_t TrafficSim::sample_arrivals(Approach& ap, double rate) {
    if (cfg_.deterministic) {
        const double before = std::floor(ap.arrival_acc);
        ap.arrival_acc += rate;
        return static_cast<std::int64_t>(std::floor(ap.arrival_acc) - before);
    }
    std::poisson_distribution<std::int64_t> pois(rate);
    return rate > 0.0 ? pois(arrivals_rng_) : 0;
}

std::int64_t TrafficSim::serve(Approach& ap, double capacity, std::uint64_t now) {
    (void)now;
    ap.credit += capacity;
    const auto allowed = static_cast<std::int64_t>(std::floor(ap.credit));
    std::int64_t served = std::min(ap.queue, allowed);
    ap.credit -= static_cast<double>(served);
    ap.queue -= served;
    std::int64_t left = served;
    while (left > 0) {
        auto& head = ap.cohorts.front();
        const auto take = std::min(left, head.count);
        head.count -= take;
        left -= take;
        if (head.count == 0) ap.cohorts.pop_front();
    }
    if (ap.queue == 0) {
        ap.credit -= std::floor(ap.credit);  // unused green time does not bank
    }
    return served;
}

double TrafficSim::mean_age_ticks(const Approach& ap, std::uint64_t now) {
    if (ap.queue == 0) return 0.0;
    double acc = 0.0;
    for (const auto& c : ap.cohorts) acc += static_cast<double>(c.count) * static_cast<double>(now - c.tick);
    return acc / static_cast<double>(ap.queue);
}

void TrafficSim::inject_anomaly(std::size_t intersection, AnomalyKind kind, double magnitude,
                                std::size_t duration_ticks) {
    if (!(magnitude > 0.0)) {
        throw std::invalid_argument("inject_anomaly: magnitude must be positive");
    }
    if (intersection >= nodes_.size()) {
        throw std::invalid_argument("inject_anomaly: intersection out of range");
    }
    anomalies_.push_back({intersection, kind, magnitude, duration_ticks});
}

StepTotals TrafficSim::step(std::span<const double> green_ns) {
    const std::size_t N = nodes_.size();
    if (green_ns.size() != N) {
        throw std::invalid_argument("TrafficSim::step: one action per intersection required");
    }
    for (double g : green_ns) {
        if (!(g >= 0.0 && g <= 1.0)) {
            throw std::invalid_argument("TrafficSim::step: green share must lie in [0, 1]");
        }
    }
    std::vector<double> demand_mult(N, 1.0), cap_mult(N, 1.0);
    for (const auto& a : anomalies_) {
        if (a.kind == AnomalyKind::DemandSurge) demand_mult[a.intersection] *= a.magnitude;
        else cap_mult[a.intersection] /= a.magnitude;
    }

    StepTotals tot;
    const std::uint64_t now = tick_;
    const std::size_t n = cfg_.grid_n;
    std::vector<std::int64_t> spill_ns(N, 0), spill_ew(N, 0), arrivals(N, 0), served(N, 0);
    for (std::size_t j = 0; j < N; ++j) {
        auto& node = nodes_[j];
        const auto s_ns = serve(node.ns, cfg_.sat_flow * green_ns[j] * cap_mult[j], now);
        const auto s_ew = serve(node.ew, cfg_.sat_flow * (1.0 - green_ns[j]) * cap_mult[j], now);
        served[j] = s_ns + s_ew;
        node.served = served[j];
        tot.served += served[j];
        auto split = [&](std::int64_t count) -> std::int64_t {
            if (count == 0 || cfg_.spill == 0.0) return 0;
            if (cfg_.deterministic) return static_cast<std::int64_t>(std::floor(static_cast<double>(count) * cfg_.spill));
            std::binomial_distribution<std::int64_t> bin(count, cfg_.spill);
            return bin(spill_rng_);
        };
        const std::size_t r = j / n, c = j % n;
        const auto k_ns = split(s_ns);
        const auto k_ew = split(s_ew);
        // spill moves south and east; at the boundary it leaves the grid
        std::int64_t kept = 0;
        if (r + 1 < n) {
            spill_ns[(r + 1) * n + c] += k_ns;
            kept += k_ns;
        }
        if (c + 1 < n) {
            spill_ew[r * n + c + 1] += k_ew;
            kept += k_ew;
        }
        tot.exited += served[j] - kept;
    }
    for (std::size_t j = 0; j < N; ++j) {
        auto& node = nodes_[j];
        const double rate = demand_rate(now) * demand_mult[j];
        const auto a_ns = sample_arrivals(node.ns, rate) + spill_ns[j];
        const auto a_ew = sample_arrivals(node.ew, rate) + spill_ew[j];
        for (auto [ap, cnt] : {std::pair{&node.ns, a_ns}, std::pair{&node.ew, a_ew}}) {
            if (cnt > 0) {
                ap->cohorts.push_back({now + 1, cnt});
                ap->queue += cnt;
            }
        }
        arrivals[j] = a_ns + a_ew;
        tot.arrived += arrivals[j];
    }
    cum_arrived_ += tot.arrived;
    cum_served_ += tot.served;
    tick_ = now + 1;
    for (std::size_t j = 0; j < N; ++j) {
        auto& node = nodes_[j];
        const double age = (mean_age_ticks(node.ns, tick_) * static_cast<double>(node.ns.queue) +
                            mean_age_ticks(node.ew, tick_) * static_cast<double>(node.ew.queue));
        const auto q = node.ns.queue + node.ew.queue;
        node.wait_s = q > 0 ? age / static_cast<double>(q) * cfg_.tick_seconds : 0.0;
        node.throughput_ema += cfg_.throughput_ema * (static_cast<double>(served[j]) - node.throughput_ema);
        const double flow = static_cast<double>(arrivals[j] + served[j]);
        for (auto i : coverage_.covered[j]) flow_acc_[i] += cell_share_[j][i] * flow;
    }
    for (auto& a : anomalies_) --a.ticks_left;
    std::erase_if(anomalies_, [](const ActiveAnomaly& a) { return a.ticks_left == 0; });
    return tot;
}

std::vector<double> TrafficSim::take_observation() {
    std::vector<double> out = flow_acc_;
    std::fill(flow_acc_.begin(), flow_acc_.end(), 0.0);
    if (!cfg_.deterministic && cfg_.sensor_sd > 0.0) {
        std::normal_distribution<double> noise(0.0, cfg_.sensor_sd);
        for (double& v : out) v += noise(sensor_rng_);
    }
    return out;
}

std::vector<LocalMeasurement> TrafficSim::local_measurements() const {
    std::vector<LocalMeasurement> out(nodes_.size());
    for (std::size_t j = 0; j < nodes_.size(); ++j) {
        out[j] = {static_cast<double>(nodes_[j].ns.queue), static_cast<double>(nodes_[j].ew.queue), nodes_[j].wait_s,
                  nodes_[j].throughput_ema};
    }
    return out;
}

double TrafficSim::network_throughput() const {
    double acc = 0.0;
    for (const auto& node : nodes_) acc += node.throughput_ema;
    return acc;
}

std::int64_t TrafficSim::total_queue() const {
    std::int64_t q = 0;
    for (const auto& node : nodes_) q += node.ns.queue + node.ew.queue;
    return q;
}

}  // namespace tuq
