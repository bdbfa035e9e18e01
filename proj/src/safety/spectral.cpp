#include "trafficuq/safety/spectral.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "trafficuq/common/rng.hpp"

namespace tuq {

double spectral_norm(const Eigen::MatrixXd& M, std::size_t max_iter, double tol, std::uint64_t seed) {
    if (M.size() == 0) {
        throw std::invalid_argument("spectral_norm: empty matrix");
    }
    if (M.isZero(0.0)) {
        return 0.0;
    }
    auto rng = make_rng(seed, "spectral_norm");
    std::normal_distribution<double> gauss;
    Eigen::VectorXd v(M.cols());
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = gauss(rng);
    v.normalize();
    double lambda = 0.0;
    for (std::size_t it = 0; it < max_iter; ++it) {
        Eigen::VectorXd w = M.transpose() * (M * v);
        const double next = v.dot(w);  // Rayleigh quotient of M^T M
        const double norm = w.norm();
        if (norm == 0.0) {
            // start vector fell in the null space; rotate it
            v = Eigen::VectorXd::Unit(v.size(), static_cast<Eigen::Index>(it % static_cast<std::size_t>(v.size())));
            continue;
        }
        v = w / norm;
        if (it > 0 && std::abs(next - lambda) <= tol * next) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

Eigen::MatrixXd spectrally_normalize(const Eigen::MatrixXd& M, double target) {
    const double s = spectral_norm(M);
    return s > 0.0 ? Eigen::MatrixXd(M * (target / s)) : M;
}

}  // namespace tuq
