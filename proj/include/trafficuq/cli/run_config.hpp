#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "trafficuq/anomaly/bootstrap.hpp"
#include "trafficuq/common/io.hpp"
#include "trafficuq/sim/closed_loop.hpp"
#include "trafficuq/sim/pipeline.hpp"
#include "trafficuq/sim/traffic_sim.hpp"

namespace tuq {

/// Every tunable of every subcommand, grouped by section. Sections and keys
/// not listed here are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    SimConfig sim;
    std::size_t steps = 5000;
    DetectionOptions detection;
    ClosedLoopConfig closed_loop;  // its sim section mirrors `sim`
    SafetyModelOptions safety;
    std::size_t max_rounds = 3;
    std::size_t seeds = 10;
    BootstrapConfig audit;

    Json to_json() const;
    static RunConfig from_json(const Json& j);
};

/// Applies "section.key=value" overrides; the value is parsed as JSON when
/// possible and taken as a string otherwise.
void apply_override(Json& doc, const std::string& assignment);

/// Defaults, then the config file, then overrides.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides);

}  // namespace tuq
