#include "trafficuq/safety/certificate.hpp"

#include <cmath>
#include <stdexcept>

namespace tuq {

double epsilon_star(double delta_slack, double kappa, double dbar_c, double L_L, double J_W) {
    if (!(L_L > 0.0)) {
        throw std::invalid_argument("epsilon_star: L_L must be positive");
    }
    if (kappa < 0.0 || delta_slack < 0.0) {
        throw std::invalid_argument("epsilon_star: kappa and delta_slack must be nonnegative");
    }
    return (delta_slack + kappa * dbar_c) / (L_L * (1.0 + J_W));
}

double epsilon_star_state_scaled(double delta_slack, double kappa, double dbar_c, double L_L, double J_W,
                                 double mean_state_norm) {
    if (!(mean_state_norm > 0.0)) {
        throw std::invalid_argument("epsilon_star_state_scaled: mean state norm must be positive");
    }
    return epsilon_star(delta_slack, kappa, dbar_c, L_L, J_W) / mean_state_norm;
}

std::string verdict_name(Verdict v) {
    switch (v) {
        case Verdict::Pass: return "pass";
        case Verdict::Fail: return "fail";
        case Verdict::Undetermined: return "undetermined";
    }
    return "undetermined";
}

Verdict parse_verdict(const std::string& s) {
    if (s == "pass") return Verdict::Pass;
    if (s == "fail") return Verdict::Fail;
    if (s == "undetermined") return Verdict::Undetermined;
    throw std::invalid_argument("unknown verdict: " + s);
}

SafetyCertificate iterative_certificate(const std::function<RolloutStats(std::size_t round)>& rollout,
                                        double eps_model, double L_L, double J_W, double delta_slack, double kappa,
                                        std::size_t max_rounds, double initial_dbar_c) {
    if (max_rounds == 0) {
        throw std::invalid_argument("iterative_certificate: max_rounds must be positive");
    }
    SafetyCertificate c;
    c.eps_model = eps_model;
    c.L_L = L_L;
    c.J_W = J_W;
    c.delta_slack = delta_slack;
    c.kappa = kappa;
    double dbar = initial_dbar_c;
    double state_norm = 1.0;
    c.eps_star_floor = epsilon_star(delta_slack, kappa, 0.0, L_L, J_W);
    for (std::size_t r = 1; r <= max_rounds; ++r) {
        CertificateRound round;
        round.round = r;
        round.dbar_c = dbar;
        round.eps_star = epsilon_star(delta_slack, kappa, dbar, L_L, J_W);
        round.verdict = eps_model < round.eps_star ? Verdict::Pass : Verdict::Fail;
        c.dbar_c = dbar;
        c.eps_star = round.eps_star;
        c.eps_star_state_scaled = epsilon_star_state_scaled(delta_slack, kappa, dbar, L_L, J_W, state_norm);
        const bool stable = r > 1 && c.history.back().verdict == round.verdict;
        if (stable) {
            c.history.push_back(round);
            c.verdict = round.verdict;
            return c;
        }
        if (r < max_rounds) {
            const auto stats = rollout(r);
            round.rollout = true;
            round.measured_dbar_c = stats.mean_dc;
            round.mean_state_norm = stats.mean_state_norm;
            dbar = stats.mean_dc;
            state_norm = stats.mean_state_norm > 0.0 ? stats.mean_state_norm : 1.0;
        }
        c.history.push_back(round);
    }
    c.verdict = Verdict::Undetermined;
    return c;
}

Json SafetyCertificate::to_json() const {
    Json j;
    j["eps_model"] = eps_model;
    j["L_L"] = L_L;
    j["J_W"] = J_W;
    j["delta_slack"] = delta_slack;
    j["kappa"] = kappa;
    j["dbar_C"] = dbar_c;
    j["eps_star"] = eps_star;
    j["eps_star_state_scaled"] = eps_star_state_scaled;
    j["eps_star_floor"] = eps_star_floor;
    j["verdict"] = verdict_name(verdict);
    Json h = Json::array();
    for (const auto& r : history) {
        Json e;
        e["round"] = r.round;
        e["dbar_C"] = r.dbar_c;
        e["eps_star"] = r.eps_star;
        e["verdict"] = verdict_name(r.verdict);
        e["rollout"] = r.rollout;
        e["measured_dbar_C"] = r.measured_dbar_c;
        e["mean_state_norm"] = r.mean_state_norm;
        h.push_back(std::move(e));
    }
    j["history"] = std::move(h);
    return j;
}

SafetyCertificate SafetyCertificate::from_json(const Json& j) {
    SafetyCertificate c;
    c.eps_model = j.at("eps_model").get<double>();
    c.L_L = j.at("L_L").get<double>();
    c.J_W = j.at("J_W").get<double>();
    c.delta_slack = j.at("delta_slack").get<double>();
    c.kappa = j.at("kappa").get<double>();
    c.dbar_c = j.at("dbar_C").get<double>();
    c.eps_star = j.at("eps_star").get<double>();
    c.eps_star_state_scaled = j.at("eps_star_state_scaled").get<double>();
    c.eps_star_floor = j.at("eps_star_floor").get<double>();
    c.verdict = parse_verdict(j.at("verdict").get<std::string>());
    for (const auto& e : j.at("history")) {
        CertificateRound r;
        r.round = e.at("round").get<std::size_t>();
        r.dbar_c = e.at("dbar_C").get<double>();
        r.eps_star = e.at("eps_star").get<double>();
        r.verdict = parse_verdict(e.at("verdict").get<std::string>());
        r.rollout = e.at("rollout").get<bool>();
        r.measured_dbar_c = e.at("measured_dbar_C").get<double>();
        r.mean_state_norm = e.at("mean_state_norm").get<double>();
        c.history.push_back(r);
    }
    return c;
}

}  // namespace tuq
