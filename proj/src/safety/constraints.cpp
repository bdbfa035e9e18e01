#include "trafficuq/safety/constraints.hpp"

#include <algorithm>
#include <stdexcept>

namespace tuq {

void ConstraintSpec::validate() const {
    if (!(d_queue > 0.0) || !(d_wait > 0.0) || !(d_through > 0.0) || !(theta_base > 0.0)) {
        throw std::invalid_argument("constraint thresholds must be positive");
    }
}

double constraint_violation(const AggregateMetrics& m, const ConstraintSpec& spec) {
    return std::max(0.0, m.mean_queue - spec.d_queue) + std::max(0.0, m.mean_wait - spec.d_wait) +
           std::max(0.0, spec.d_through * spec.theta_base - m.throughput);
}

double LinearConstraints::violation(const Eigen::VectorXd& s) const {
    double total = 0.0;
    for (const auto& r : rows) {
        if (r.coeff.size() != s.size()) {
            throw std::invalid_argument("constraint " + r.name + " has the wrong dimension");
        }
        total += std::max(0.0, r.sign * (r.coeff.dot(s) - r.threshold));
    }
    return total;
}

LinearConstraints coordinate_upper_bounds(const std::vector<double>& thresholds) {
    LinearConstraints c;
    const auto n = static_cast<Eigen::Index>(thresholds.size());
    for (Eigen::Index k = 0; k < n; ++k) {
        LinearConstraints::Row r;
        r.coeff = Eigen::VectorXd::Unit(n, k);
        r.threshold = thresholds[static_cast<std::size_t>(k)];
        r.name = "x" + std::to_string(k);
        c.rows.push_back(std::move(r));
    }
    return c;
}

}  // namespace tuq
