#include "trafficuq/cli/run_config.hpp"

#include <stdexcept>

namespace tuq {

namespace {

void reject_unknown(const Json& j, const Json& defaults, const std::string& where) {
    if (!j.is_object()) throw std::invalid_argument(where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw std::invalid_argument("unknown key " + where + "." + key);
    }
}

Json safety_json(const SafetyModelOptions& s, std::size_t max_rounds) {
    Json j;
    j["members"] = s.members;
    j["collect_episodes"] = s.collect_episodes;
    j["holdout"] = s.holdout;
    j["kappa"] = s.filter.kappa;
    j["delta_slack"] = s.filter.delta_slack;
    j["n_proj"] = s.filter.n_proj;
    j["step"] = s.filter.step;
    j["penalty"] = s.filter.penalty;
    j["fd_relative"] = s.filter.fd_relative;
    j["expectation"] = s.filter.mode == ExpectationMode::EnsembleMean ? "ensemble_mean" : "member_mean";
    j["max_rounds"] = max_rounds;
    return j;
}

Json audit_json(const BootstrapConfig& b) {
    Json j;
    j["replicates"] = b.replicates;
    j["alpha"] = b.alpha;
    j["time_blocks"] = b.time_blocks;
    j["space_hops"] = b.space_hops;
    j["max_rows"] = b.max_rows;
    return j;
}

}  // namespace

Json RunConfig::to_json() const {
    Json j;
    j["seed"] = seed;
    j["sim"] = sim.to_json();
    Json gen;
    gen["steps"] = steps;
    j["generate"] = gen;
    j["detection"] = detection.to_json();
    Json cl = closed_loop.to_json();
    cl.erase("sim");
    j["closed_loop"] = cl;
    j["safety"] = safety_json(safety, max_rounds);
    Json simulate;
    simulate["seeds"] = seeds;
    j["simulate"] = simulate;
    j["audit"] = audit_json(audit);
    return j;
}

RunConfig RunConfig::from_json(const Json& j) {
    RunConfig c;
    const Json defaults = c.to_json();
    reject_unknown(j, defaults, "config");
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("sim")) c.sim = SimConfig::from_json(j.at("sim"));
    if (j.contains("generate")) {
        reject_unknown(j.at("generate"), defaults.at("generate"), "generate");
        c.steps = j.at("generate").value("steps", c.steps);
    }
    if (j.contains("detection")) c.detection = DetectionOptions::from_json(j.at("detection"));
    if (j.contains("closed_loop")) {
        if (j.at("closed_loop").contains("sim")) {
            throw std::invalid_argument("closed_loop.sim is not allowed; use the top-level sim section");
        }
        c.closed_loop = ClosedLoopConfig::from_json(j.at("closed_loop"));
    }
    if (j.contains("safety")) {
        const Json& s = j.at("safety");
        reject_unknown(s, defaults.at("safety"), "safety");
        c.safety.members = s.value("members", c.safety.members);
        c.safety.collect_episodes = s.value("collect_episodes", c.safety.collect_episodes);
        c.safety.holdout = s.value("holdout", c.safety.holdout);
        c.safety.filter.kappa = s.value("kappa", c.safety.filter.kappa);
        c.safety.filter.delta_slack = s.value("delta_slack", c.safety.filter.delta_slack);
        c.safety.filter.n_proj = s.value("n_proj", c.safety.filter.n_proj);
        c.safety.filter.step = s.value("step", c.safety.filter.step);
        c.safety.filter.penalty = s.value("penalty", c.safety.filter.penalty);
        c.safety.filter.fd_relative = s.value("fd_relative", c.safety.filter.fd_relative);
        if (s.contains("expectation")) {
            const auto e = s.at("expectation").get<std::string>();
            if (e == "ensemble_mean") c.safety.filter.mode = ExpectationMode::EnsembleMean;
            else if (e == "member_mean") c.safety.filter.mode = ExpectationMode::MemberMean;
            else throw std::invalid_argument("unknown safety.expectation: " + e);
        }
        c.max_rounds = s.value("max_rounds", c.max_rounds);
    }
    if (j.contains("simulate")) {
        reject_unknown(j.at("simulate"), defaults.at("simulate"), "simulate");
        c.seeds = j.at("simulate").value("seeds", c.seeds);
    }
    if (j.contains("audit")) {
        const Json& a = j.at("audit");
        reject_unknown(a, defaults.at("audit"), "audit");
        c.audit.replicates = a.value("replicates", c.audit.replicates);
        c.audit.alpha = a.value("alpha", c.audit.alpha);
        c.audit.time_blocks = a.value("time_blocks", c.audit.time_blocks);
        c.audit.space_hops = a.value("space_hops", c.audit.space_hops);
        c.audit.max_rows = a.value("max_rows", c.audit.max_rows);
    }
    c.closed_loop.sim = c.sim;
    if (c.max_rounds < 2) throw std::invalid_argument("safety.max_rounds must be at least 2");
    if (!(c.safety.filter.kappa > 0.0) || c.safety.filter.delta_slack < 0.0) {
        throw std::invalid_argument("safety.kappa must be positive and safety.delta_slack nonnegative");
    }
    return c;
}

void apply_override(Json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw std::invalid_argument("override must look like section.key=value: " + assignment);
    }
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    Json value = Json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw std::invalid_argument("empty key in override: " + assignment);
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
    Json doc = RunConfig{}.to_json();
    if (path) {
        if (!std::filesystem::exists(*path)) {
            throw std::invalid_argument("config file not found: " + path->string());
        }
        const Json user = read_json(*path);
        if (!user.is_object()) throw std::invalid_argument("config file must hold a JSON object");
        RunConfig::from_json(user);  // unknown keys surface here with the user's spelling
        doc.merge_patch(user);
    }
    for (const auto& o : overrides) apply_override(doc, o);
    return RunConfig::from_json(doc);
}

}  // namespace tuq
