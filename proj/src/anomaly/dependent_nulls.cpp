#include "trafficuq/anomaly/dependent_nulls.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace tuq {

double uniform_corr_from_gaussian(double r) { return 6.0 / std::numbers::pi * std::asin(r / 2.0); }

double block_corr_for_phi(double phi, std::size_t block_len) {
    if (block_len < 2) {
        return 0.0;
    }
    double acc = 0.0;
    double pairs = 0.0;
    for (std::size_t k = 1; k < block_len; ++k) {
        const double w = static_cast<double>(block_len - k);
        acc += w * uniform_corr_from_gaussian(std::pow(phi, static_cast<double>(k)));
        pairs += w;
    }
    return acc / pairs;
}

double phi_for_block_corr(double target, std::size_t block_len) {
    double lo = 0.0;
    double hi = 0.9999;
    if (target <= 0.0) return 0.0;
    if (target >= block_corr_for_phi(hi, block_len)) {
        throw std::invalid_argument("phi_for_block_corr: target correlation unreachable");
    }
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (block_corr_for_phi(mid, block_len) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

DependentNullGenerator::DependentNullGenerator(const GraphTopology& g, DependentNullConfig cfg) : cfg_(cfg) {
    if (!(cfg_.phi >= 0.0 && cfg_.phi < 1.0)) {
        throw std::invalid_argument("DependentNullGenerator: phi must lie in [0, 1)");
    }
    if (cfg_.length_scale <= 0.0) {
        cfg_.length_scale = cfg_.phi > 0.0 ? -1.0 / std::log(cfg_.phi) : 1e-9;
    }
    const auto m = static_cast<Eigen::Index>(g.node_count());
    Eigen::MatrixXd K(m, m);
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < m; ++j) {
            K(i, j) = std::exp(-euclidean_km(g, static_cast<std::size_t>(i), static_cast<std::size_t>(j)) /
                               cfg_.length_scale);
        }
    }
    K.diagonal().array() += 1e-10;
    Eigen::LLT<Eigen::MatrixXd> llt(K);
    if (llt.info() != Eigen::Success) {
        throw std::runtime_error("DependentNullGenerator: spatial kernel is not positive definite");
    }
    chol_ = llt.matrixL();
    // Rescale rows so every marginal variance is exactly 1 despite the jitter.
    for (Eigen::Index i = 0; i < m; ++i) {
        chol_.row(i) /= chol_.row(i).norm();
    }
}

void DependentNullGenerator::sample(std::size_t T, Rng& rng, Panel& scores, std::vector<bool>& signal) const {
    const auto m = chol_.rows();
    std::normal_distribution<double> gauss;
    std::bernoulli_distribution is_signal(cfg_.signal_fraction);
    signal.assign(static_cast<std::size_t>(m), false);
    for (auto&& s : signal) s = is_signal(rng);
    scores = Panel(T, static_cast<std::size_t>(m));
    Eigen::VectorXd e(m);
    Eigen::VectorXd z(m);
    const double innov = std::sqrt(1.0 - cfg_.phi * cfg_.phi);
    for (std::size_t t = 0; t < T; ++t) {
        for (Eigen::Index i = 0; i < m; ++i) e(i) = gauss(rng);
        const Eigen::VectorXd fresh = chol_.triangularView<Eigen::Lower>() * e;
        z = t == 0 ? fresh : Eigen::VectorXd(cfg_.phi * z + innov * fresh);
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto n = static_cast<std::size_t>(i);
            scores.at(t, n) = z(i) + (signal[n] ? cfg_.signal_shift : 0.0);
        }
    }
}

}  // namespace tuq
