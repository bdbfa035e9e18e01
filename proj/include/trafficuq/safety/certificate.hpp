#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "trafficuq/common/io.hpp"

namespace tuq {

/// (delta + kappa dbar_C) / (L_L (1 + J_W)).
double epsilon_star(double delta_slack, double kappa, double dbar_c, double L_L, double J_W);

/// Variant that also divides by the mean state norm seen in rollouts.
double epsilon_star_state_scaled(double delta_slack, double kappa, double dbar_c, double L_L, double J_W,
                                 double mean_state_norm);

enum class Verdict { Pass, Fail, Undetermined };

std::string verdict_name(Verdict v);
Verdict parse_verdict(const std::string& s);

struct CertificateRound {
    std::size_t round = 0;
    double dbar_c = 0.0;         // value used for eps_star this round
    double eps_star = 0.0;
    Verdict verdict = Verdict::Undetermined;
    double measured_dbar_c = 0.0;  // rollout mean d_C (NaN-free; 0 if no rollout)
    double mean_state_norm = 0.0;
    bool rollout = false;
};

struct SafetyCertificate {
    double eps_model = 0.0;
    double L_L = 0.0;
    double J_W = 0.0;
    double delta_slack = 0.05;
    double kappa = 0.5;
    double dbar_c = 1.0;
    double eps_star = 0.0;
    double eps_star_state_scaled = 0.0;
    double eps_star_floor = 0.0;  // eps* at dbar_C = 0; a pass below it holds for any dbar_C
    Verdict verdict = Verdict::Undetermined;
    std::vector<CertificateRound> history;

    Json to_json() const;
    static SafetyCertificate from_json(const Json& j);
};

struct RolloutStats {
    double mean_dc = 0.0;
    double mean_state_norm = 1.0;
};

/// Round r: eps* from the current dbar_C, verdict eps_model < eps*, then a
/// rollout measures the next dbar_C. Stops once two consecutive rounds agree;
/// otherwise the verdict is Undetermined after max_rounds.
SafetyCertificate iterative_certificate(const std::function<RolloutStats(std::size_t round)>& rollout,
                                        double eps_model, double L_L, double J_W, double delta_slack, double kappa,
                                        std::size_t max_rounds = 3, double initial_dbar_c = 1.0);

}  // namespace tuq
