#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tuq {

/// Thresholds of the three operational constraints.
struct ConstraintSpec {
    double d_queue = 50.0;        // vehicles, mean queue must stay <=
    double d_wait = 120.0;        // seconds, mean wait must stay <=
    double d_through = 0.8;       // fraction of theta_base, throughput must stay >=
    double theta_base = 1.0;      // baseline throughput, vehicles per step

    void validate() const;
};

struct AggregateMetrics {
    double mean_queue = 0.0;
    double mean_wait = 0.0;
    double throughput = 0.0;
};

/// d_C = max(0, queue - d_queue) + max(0, wait - d_wait) + max(0, d_through theta_base - throughput).
double constraint_violation(const AggregateMetrics& m, const ConstraintSpec& spec);

/// Constraints that are linear functionals of a state vector:
/// d_C(s) = sum_k max(0, sign_k (c_k . s - d_k)), sign +1 for <= and -1 for >=.
struct LinearConstraints {
    struct Row {
        Eigen::VectorXd coeff;
        double threshold = 0.0;
        double sign = 1.0;
        std::string name;
    };
    std::vector<Row> rows;

    double violation(const Eigen::VectorXd& s) const;
};

/// Unit-coefficient upper bounds on individual state coordinates.
LinearConstraints coordinate_upper_bounds(const std::vector<double>& thresholds);

}  // namespace tuq
