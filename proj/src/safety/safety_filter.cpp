#include "trafficuq/safety/safety_filter.hpp"

#include <stdexcept>

namespace tuq {

SafetyFilter::SafetyFilter(const WorldModelEnsemble& e, LyapunovParams lyap, LinearConstraints constraints,
                           SafetyFilterConfig cfg, Eigen::VectorXd lower, Eigen::VectorXd upper)
    : ensemble_(&e),
      lyap_(std::move(lyap)),
      constraints_(std::move(constraints)),
      cfg_(cfg),
      lower_(std::move(lower)),
      upper_(std::move(upper)) {
    if (e.members.empty()) {
        throw std::invalid_argument("SafetyFilter: empty ensemble");
    }
    const auto ds = static_cast<Eigen::Index>(e.state_dim);
    const auto da = static_cast<Eigen::Index>(e.action_dim);
    if (lyap_.s_safe.size() != ds || lower_.size() != da || upper_.size() != da) {
        throw std::invalid_argument("SafetyFilter: dimension mismatch between ensemble, Lyapunov and bounds");
    }
    if (!lower_.allFinite() || !upper_.allFinite() || (upper_.array() < lower_.array()).any()) {
        throw std::invalid_argument("SafetyFilter: action bounds must be finite and ordered");
    }
    const Eigen::MatrixXd Wm = e.mean_matrix();
    mean_state_ = Wm.leftCols(ds);
    mean_action_ = Wm.middleCols(ds, da);
    mean_bias_ = Wm.col(ds + da);
}

double SafetyFilter::expected_next_L(const Eigen::VectorXd& base, const Eigen::VectorXd& a,
                                     const std::vector<Eigen::VectorXd>& member_base) const {
    if (cfg_.mode == ExpectationMode::EnsembleMean) {
        return lyapunov_value(base + mean_action_ * a, lyap_);
    }
    const auto ds = static_cast<Eigen::Index>(ensemble_->state_dim);
    const auto da = static_cast<Eigen::Index>(ensemble_->action_dim);
    double acc = 0.0;
    for (std::size_t k = 0; k < ensemble_->members.size(); ++k) {
        acc += lyapunov_value(member_base[k] + ensemble_->members[k].W.middleCols(ds, da) * a, lyap_);
    }
    return acc / static_cast<double>(ensemble_->members.size());
}

namespace {

std::vector<Eigen::VectorXd> member_bases(const WorldModelEnsemble& e, const Eigen::VectorXd& s, ExpectationMode mode) {
    std::vector<Eigen::VectorXd> out;
    if (mode != ExpectationMode::MemberMean) {
        return out;
    }
    const auto ds = static_cast<Eigen::Index>(e.state_dim);
    const auto da = static_cast<Eigen::Index>(e.action_dim);
    for (const auto& m : e.members) {
        out.push_back(m.W.leftCols(ds) * s + m.W.col(ds + da));
    }
    return out;
}

}  // namespace

SafetyCheck SafetyFilter::check(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
    const Eigen::VectorXd base = mean_state_ * s + mean_bias_;
    const auto mb = member_bases(*ensemble_, s, cfg_.mode);
    SafetyCheck c;
    c.delta_L = expected_next_L(base, a, mb) - lyapunov_value(s, lyap_);
    c.bound = -cfg_.kappa * constraints_.violation(s) + cfg_.delta_slack;
    c.safe = c.delta_L <= c.bound;
    return c;
}

ProjectionResult SafetyFilter::apply(const Eigen::VectorXd& s, const Eigen::VectorXd& a0) const {
    if (a0.size() != lower_.size()) {
        throw std::invalid_argument("SafetyFilter::apply: action dimension mismatch");
    }
    ProjectionResult res;
    res.check = check(s, a0);
    if (res.check.safe) {
        res.action = a0;
        return res;
    }
    const Eigen::VectorXd base = mean_state_ * s + mean_bias_;
    const auto mb = member_bases(*ensemble_, s, cfg_.mode);
    auto objective = [&](const Eigen::VectorXd& a) {
        const double Lnext = expected_next_L(base, a, mb);
        return Lnext + cfg_.penalty * constraints_.violation(base + mean_action_ * a);
    };
    Eigen::VectorXd a = a0.cwiseMax(lower_).cwiseMin(upper_);
    Eigen::VectorXd grad(a.size());
    for (std::size_t it = 0; it < cfg_.n_proj; ++it) {
        for (Eigen::Index k = 0; k < a.size(); ++k) {
            const double h = cfg_.fd_relative * std::max(upper_(k) - lower_(k), 1e-12);
            Eigen::VectorXd ap = a;
            Eigen::VectorXd am = a;
            ap(k) += h;
            am(k) -= h;
            grad(k) = (objective(ap) - objective(am)) / (2.0 * h);
        }
        a = (a - cfg_.step * grad).cwiseMax(lower_).cwiseMin(upper_);
        ++res.iterations;
    }
    res.action = a;
    res.projected = true;
    res.check = check(s, a);
    return res;
}

SafetyCheck check_lyapunov_safe(const Eigen::VectorXd& s, const Eigen::VectorXd& a, const WorldModelEnsemble& e,
                                const LyapunovParams& lyap, const LinearConstraints& constraints,
                                const SafetyFilterConfig& cfg) {
    const auto da = static_cast<Eigen::Index>(e.action_dim);
    const Eigen::VectorXd big = Eigen::VectorXd::Constant(da, 1e300);
    return SafetyFilter(e, lyap, constraints, cfg, -big, big).check(s, a);
}

ProjectionResult project_safe_action(const Eigen::VectorXd& s, const Eigen::VectorXd& a0,
                                     const WorldModelEnsemble& e, const LyapunovParams& lyap,
                                     const LinearConstraints& constraints, const SafetyFilterConfig& cfg,
                                     const Eigen::VectorXd& lower, const Eigen::VectorXd& upper) {
    return SafetyFilter(e, lyap, constraints, cfg, lower, upper).apply(s, a0);
}

}  // namespace tuq
