#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

namespace tuq {

/// Largest singular value by power iteration on M^T M from a seeded random
/// start. Stops when the relative change of the estimate drops below tol.
double spectral_norm(const Eigen::MatrixXd& M, std::size_t max_iter = 20000, double tol = 1e-14,
                     std::uint64_t seed = 0);

/// M / spectral_norm(M), or M unchanged when it is zero.
Eigen::MatrixXd spectrally_normalize(const Eigen::MatrixXd& M, double target = 1.0);

}  // namespace tuq
