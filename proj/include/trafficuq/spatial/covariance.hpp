#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trafficuq/common/panel.hpp"

namespace tuq {

enum class CovarianceKind { Diagonal, DistanceKernel, Empirical };

CovarianceKind parse_covariance_kind(const std::string& name);

/// Correlation model between cell forecasts; Cov_ik = rho_ik sigma_i sigma_k.
struct CovarianceModel {
    CovarianceKind kind = CovarianceKind::DistanceKernel;
    double length_scale_km = 2.0;
    double cutoff_km = 10.0;
    Eigen::MatrixXd empirical;  // covariance over cells, used by Empirical

    /// rho between cells i and k with centres ci, ck.
    double correlation(std::size_t i, std::size_t k, const std::array<double, 2>& ci,
                       const std::array<double, 2>& ck) const;
};

/// exp(-d / length_scale) over all pairs of points.
Eigen::MatrixXd kernel_correlation(const std::vector<std::array<double, 2>>& coords, double length_scale_km);

/// Sample covariance (n - 1) of residual columns, zeroed beyond cutoff,
/// symmetrized, with negative eigenvalues clipped to zero.
Eigen::MatrixXd empirical_residual_cov(const Panel& residuals, const std::vector<std::array<double, 2>>& coords,
                                       double cutoff_km);

}  // namespace tuq
