#include "trafficuq/spatial/covariance.hpp"

#include <cmath>
#include <stdexcept>

namespace tuq {

CovarianceKind parse_covariance_kind(const std::string& name) {
    if (name == "diagonal") return CovarianceKind::Diagonal;
    if (name == "kernel") return CovarianceKind::DistanceKernel;
    if (name == "empirical") return CovarianceKind::Empirical;
    throw std::invalid_argument("unknown covariance kind: " + name);
}

double CovarianceModel::correlation(std::size_t i, std::size_t k, const std::array<double, 2>& ci,
                                    const std::array<double, 2>& ck) const {
    if (i == k) {
        return 1.0;
    }
    switch (kind) {
        case CovarianceKind::Diagonal:
            return 0.0;
        case CovarianceKind::DistanceKernel:
            return std::exp(-std::hypot(ci[0] - ck[0], ci[1] - ck[1]) / length_scale_km);
        case CovarianceKind::Empirical: {
            const auto a = static_cast<Eigen::Index>(i);
            const auto b = static_cast<Eigen::Index>(k);
            if (a >= empirical.rows() || b >= empirical.rows()) {
                throw std::invalid_argument("empirical covariance does not cover cell index");
            }
            const double den = std::sqrt(empirical(a, a) * empirical(b, b));
            return den > 0.0 ? empirical(a, b) / den : 0.0;
        }
    }
    return 0.0;
}

Eigen::MatrixXd kernel_correlation(const std::vector<std::array<double, 2>>& coords, double length_scale_km) {
    if (!(length_scale_km > 0.0)) {
        throw std::invalid_argument("kernel length scale must be positive");
    }
    const auto n = static_cast<Eigen::Index>(coords.size());
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto& a = coords[static_cast<std::size_t>(i)];
            const auto& b = coords[static_cast<std::size_t>(k)];
            K(i, k) = std::exp(-std::hypot(a[0] - b[0], a[1] - b[1]) / length_scale_km);
        }
    }
    return K;
}

Eigen::MatrixXd empirical_residual_cov(const Panel& residuals, const std::vector<std::array<double, 2>>& coords,
                                       double cutoff_km) {
    if (residuals.steps < 2) {
        throw std::invalid_argument("empirical_residual_cov: need at least 2 time samples");
    }
    if (coords.size() != residuals.nodes) {
        throw std::invalid_argument("empirical_residual_cov: coordinate count mismatch");
    }
    const auto T = static_cast<Eigen::Index>(residuals.steps);
    const auto n = static_cast<Eigen::Index>(residuals.nodes);
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> R(residuals.values.data(),
                                                                                               T, n);
    const Eigen::MatrixXd centred = R.rowwise() - R.colwise().mean();
    Eigen::MatrixXd C = centred.transpose() * centred / static_cast<double>(T - 1);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index k = 0; k < n; ++k) {
            const auto& a = coords[static_cast<std::size_t>(i)];
            const auto& b = coords[static_cast<std::size_t>(k)];
            if (std::hypot(a[0] - b[0], a[1] - b[1]) > cutoff_km) {
                C(i, k) = 0.0;
            }
        }
    }
    C = 0.5 * (C + C.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
    if (es.eigenvalues().minCoeff() >= 0.0) {
        return C;
    }
    const Eigen::VectorXd clipped = es.eigenvalues().cwiseMax(0.0);
    Eigen::MatrixXd out = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

}  // namespace tuq
