#include "trafficuq/safety/lyapunov.hpp"

#include <cmath>
#include <stdexcept>

#include "trafficuq/safety/spectral.hpp"

namespace tuq {

void LyapunovParams::validate() const {
    const auto ds = s_safe.size();
    if (Q.rows() != ds || Q.cols() != ds || (A.size() > 0 && A.cols() != ds)) {
        throw std::invalid_argument("Lyapunov parameters: dimension mismatch");
    }
    if (eta < 0.0) {
        throw std::invalid_argument("Lyapunov parameters: eta must be nonnegative");
    }
    if (!Q.isApprox(Q.transpose(), 1e-12)) {
        throw std::invalid_argument("Lyapunov parameters: Q must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() > 0.0)) {
        throw std::invalid_argument("Lyapunov parameters: Q must be positive definite");
    }
}

double lyapunov_value(const Eigen::VectorXd& s, const LyapunovParams& p) {
    if (s.size() != p.s_safe.size()) {
        throw std::invalid_argument("lyapunov_value: state dimension mismatch");
    }
    const Eigen::VectorXd d = s - p.s_safe;
    const double feat = p.A.size() > 0 ? (p.A * s).squaredNorm() : 0.0;
    return feat + p.eta * d.dot(p.Q * d);
}

LipschitzBounds lipschitz_bounds(const LyapunovParams& p, const WorldModelEnsemble& e, double domain_radius) {
    if (!std::isfinite(domain_radius) || !(domain_radius > 0.0)) {
        throw std::invalid_argument("lipschitz_bounds: domain must be a bounded ball with positive radius");
    }
    LipschitzBounds b;
    b.domain_radius = domain_radius;
    const double sa = p.A.size() > 0 ? spectral_norm(p.A) : 0.0;
    b.feature_sup = p.A.size() > 0 ? (p.A * p.s_safe).norm() + sa * domain_radius : 0.0;
    b.L_L = 2.0 * b.feature_sup * sa + 2.0 * p.eta * spectral_norm(p.Q) * domain_radius;
    for (const auto& m : e.members) {
        b.J_W = std::max(b.J_W, spectral_norm(m.state_block()));
    }
    return b;
}

double lyapunov_decrease_rate(std::span<const double> values) {
    if (values.size() < 2) {
        throw std::invalid_argument("lyapunov_decrease_rate: need at least two values");
    }
    std::size_t down = 0;
    for (std::size_t t = 1; t < values.size(); ++t) {
        down += values[t] < values[t - 1];
    }
    return static_cast<double>(down) / static_cast<double>(values.size() - 1);
}

namespace {

std::vector<double> flat(const Eigen::MatrixXd& M) {
    std::vector<double> out;
    for (Eigen::Index r = 0; r < M.rows(); ++r)
        for (Eigen::Index c = 0; c < M.cols(); ++c) out.push_back(M(r, c));
    return out;
}

Eigen::MatrixXd unflat(const std::vector<double>& v, Eigen::Index rows, Eigen::Index cols) {
    if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
        throw std::invalid_argument("Lyapunov JSON: matrix size mismatch");
    }
    Eigen::MatrixXd M(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) M(r, c) = v[static_cast<std::size_t>(r * cols + c)];
    return M;
}

}  // namespace

Json LyapunovParams::to_json() const {
    Json j;
    j["state_dim"] = s_safe.size();
    j["feature_rows"] = A.rows();
    j["A"] = flat(A);
    j["eta"] = eta;
    j["Q"] = flat(Q);
    j["s_safe"] = std::vector<double>(s_safe.data(), s_safe.data() + s_safe.size());
    return j;
}

LyapunovParams LyapunovParams::from_json(const Json& j) {
    LyapunovParams p;
    const auto ds = j.at("state_dim").get<Eigen::Index>();
    const auto k = j.at("feature_rows").get<Eigen::Index>();
    p.A = unflat(j.at("A").get<std::vector<double>>(), k, k > 0 ? ds : 0);
    p.eta = j.at("eta").get<double>();
    p.Q = unflat(j.at("Q").get<std::vector<double>>(), ds, ds);
    const auto s = j.at("s_safe").get<std::vector<double>>();
    p.s_safe = Eigen::Map<const Eigen::VectorXd>(s.data(), static_cast<Eigen::Index>(s.size()));
    p.validate();
    return p;
}

}  // namespace tuq
