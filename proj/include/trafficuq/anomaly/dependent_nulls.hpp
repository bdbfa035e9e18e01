#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "trafficuq/common/panel.hpp"
#include "trafficuq/common/rng.hpp"
#include "trafficuq/forecast/graph.hpp"

namespace tuq {

/// Pearson correlation of two uniforms whose Gaussian copula has correlation r.
double uniform_corr_from_gaussian(double r);

/// Expected within-block temporal p-value correlation for AR(1) coefficient
/// phi, averaged over all ordered lag pairs inside a block of length b_t.
double block_corr_for_phi(double phi, std::size_t block_len);

/// Bisection on phi in [0, 0.9999] for a target block correlation.
double phi_for_block_corr(double target, std::size_t block_len);

struct DependentNullConfig {
    double phi = 0.5;            // AR(1) coefficient in time
    double length_scale = 0.0;   // km; 0 means -1 / log(phi) so one grid hop has correlation phi
    double signal_fraction = 0.05;
    double signal_shift = 4.0;
};

/// Gaussian-copula latent field: Z_t = phi Z_{t-1} + sqrt(1 - phi^2) L e_t with
/// L L^T = exp(-d / length_scale) on node coordinates. Signal nodes get a
/// mean shift. Marginals of null nodes are exactly N(0, 1).
class DependentNullGenerator {
public:
    DependentNullGenerator(const GraphTopology& g, DependentNullConfig cfg);

    /// T x m latent scores (higher = more anomalous) and the signal mask.
    void sample(std::size_t T, Rng& rng, Panel& scores, std::vector<bool>& signal) const;

    const DependentNullConfig& config() const { return cfg_; }

private:
    DependentNullConfig cfg_;
    Eigen::MatrixXd chol_;
};

}  // namespace tuq
