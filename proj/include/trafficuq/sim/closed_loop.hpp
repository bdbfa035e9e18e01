#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "trafficuq/common/csv.hpp"
#include "trafficuq/common/io.hpp"
#include "trafficuq/safety/certificate.hpp"
#include "trafficuq/safety/constraints.hpp"
#include "trafficuq/safety/lyapunov.hpp"
#include "trafficuq/safety/policy.hpp"
#include "trafficuq/safety/safety_filter.hpp"
#include "trafficuq/safety/world_model.hpp"
#include "trafficuq/sim/pipeline.hpp"
#include "trafficuq/sim/traffic_sim.hpp"
#include "trafficuq/spatial/control_state.hpp"

namespace tuq {

enum class TrafficPolicy { QueuePressure, Fixed, Random, Exploratory };

TrafficPolicy parse_traffic_policy(const std::string& name);
std::string traffic_policy_name(TrafficPolicy p);

struct ClosedLoopConfig {
    SimConfig sim;
    std::size_t episodes = 5;
    std::size_t episode_ticks = 240;
    std::size_t start_hour = 16;  // episodes begin on day 2 at this hour
    TrafficPolicy policy = TrafficPolicy::QueuePressure;
    bool filter = true;
    bool explore = false;
    ExplorationMode exploration_mode = ExplorationMode::Sigmoid;
    ExplorationParams exploration;
    ConstraintSpec constraints;
    RewardWeights reward;
    bool record_trajectory = false;
    bool record_transitions = false;

    Json to_json() const;
    /// Unknown keys are rejected.
    static ClosedLoopConfig from_json(const Json& j);
};

/// Per-intersection queue and wait bounds plus one network throughput floor,
/// each row scaled by its threshold so d_C is a sum of relative excesses.
LinearConstraints traffic_constraints(const ControlStateLayout& layout, const ConstraintSpec& spec, double theta_base);

/// Quadratic Lyapunov function over queues and waits, scaled by the
/// constraint thresholds, with a small weight on every other coordinate.
LyapunovParams traffic_lyapunov(const ControlStateLayout& layout, const ConstraintSpec& spec,
                                const Eigen::VectorXd& s_safe);

/// Learned dynamics and filter settings for the traffic control state.
struct TrafficSafetyModel {
    WorldModelEnsemble ensemble;
    LyapunovParams lyapunov;
    SafetyFilterConfig filter;
    double domain_radius = 0.0;
    LipschitzBounds bounds;

    Json to_json() const;
    static TrafficSafetyModel from_json(const Json& j);
};

struct ClosedLoopMetrics {
    std::size_t episodes = 0;
    std::size_t steps = 0;
    double safety_pct = 0.0;            // episodes with zero violations
    double violations_per_episode = 0.0;  // violation onsets
    double rho_lyap = 0.0;
    double mean_reward = 0.0;
    double mean_dc = 0.0;
    double mean_state_norm = 0.0;
    std::size_t projections = 0;
    std::vector<std::size_t> episode_violations;

    Json to_json() const;
};

struct ClosedLoopResult {
    ClosedLoopMetrics metrics;
    std::optional<CsvTable> trajectory;  // t, state..., action..., r, d_C, L
    std::vector<Transition> transitions;
};

/// Observation rows drive the detection pipeline; every tick assembles the
/// control state, applies the policy and the optional safety filter, steps
/// the simulator and scores the outcome. The simulator seed is `seed`.
ClosedLoopResult run_closed_loop(const ClosedLoopConfig& cfg, const DetectionStack& stack,
                                 const TrafficSafetyModel* safety, std::uint64_t seed);

struct SafetyModelOptions {
    std::size_t members = 5;
    std::size_t collect_episodes = 10;
    double holdout = 0.2;
    SafetyFilterConfig filter;
};

/// Collects transitions under an exploratory policy, fits the ensemble and
/// builds the Lyapunov function around the observed operating region.
TrafficSafetyModel build_traffic_safety(const ClosedLoopConfig& cfg, const DetectionStack& stack,
                                        const SafetyModelOptions& opts, std::uint64_t seed);

/// Iterative certificate whose rollouts are filtered closed-loop runs on
/// seeds seed + round.
SafetyCertificate certify_traffic(const ClosedLoopConfig& cfg, const DetectionStack& stack,
                                  const TrafficSafetyModel& model, std::uint64_t seed, std::size_t max_rounds = 3);

}  // namespace tuq
