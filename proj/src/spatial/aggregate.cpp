#include "trafficuq/spatial/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tuq {

namespace {

void check_width(std::size_t n, const CoverageMap& map) {
    if (n != map.cell_count()) {
        throw std::invalid_argument("aggregation input has " + std::to_string(n) + " cells, map has " +
                                    std::to_string(map.cell_count()));
    }
}

}  // namespace

std::vector<double> aggregate_mean(std::span<const double> mu, const CoverageMap& map) {
    check_width(mu.size(), map);
    std::vector<double> out(map.intersection_count(), 0.0);
    for (std::size_t j = 0; j < out.size(); ++j) {
        for (auto i : map.covered[j]) {
            out[j] += map.weights[j][i] * mu[i];
        }
    }
    return out;
}

std::vector<double> aggregate_variance(std::span<const double> sigma, const CoverageMap& map,
                                       const CovarianceModel& model) {
    check_width(sigma.size(), map);
    if (model.kind == CovarianceKind::Empirical &&
        static_cast<std::size_t>(model.empirical.rows()) != map.cell_count()) {
        throw std::invalid_argument("empirical covariance shape does not match the cell count");
    }
    std::vector<double> out(map.intersection_count(), 0.0);
    for (std::size_t j = 0; j < out.size(); ++j) {
        double form = 0.0;
        for (auto i : map.covered[j]) {
            if (sigma[i] < 0.0) {
                throw std::invalid_argument("aggregate_variance: sigma must be nonnegative");
            }
            const auto ci = map.cells[i].centre();
            for (auto k : map.covered[j]) {
                const double rho = model.correlation(i, k, ci, map.cells[k].centre());
                form += map.weights[j][i] * map.weights[j][k] * rho * sigma[i] * sigma[k];
            }
        }
        out[j] = std::sqrt(std::max(form, 0.0));
    }
    return out;
}

PValueRule parse_pvalue_rule(const std::string& name) {
    if (name == "min") return PValueRule::Min;
    if (name == "weighted_geometric") return PValueRule::WeightedGeometric;
    throw std::invalid_argument("unknown p-value rule: " + name);
}

std::vector<double> aggregate_pvalues(std::span<const double> p, const CoverageMap& map, PValueRule rule) {
    check_width(p.size(), map);
    std::vector<double> out(map.intersection_count(), 1.0);
    for (std::size_t j = 0; j < out.size(); ++j) {
        if (rule == PValueRule::Min) {
            for (auto i : map.covered[j]) out[j] = std::min(out[j], p[i]);
        } else {
            double acc = 0.0;
            for (auto i : map.covered[j]) acc += map.weights[j][i] * std::log(p[i]);
            out[j] = std::exp(acc);
        }
    }
    return out;
}

std::vector<double> aggregate_flags(const std::vector<bool>& rejected, const CoverageMap& map) {
    check_width(rejected.size(), map);
    std::vector<double> out(map.intersection_count(), 0.0);
    for (std::size_t j = 0; j < out.size(); ++j) {
        for (auto i : map.covered[j]) {
            if (rejected[i]) out[j] = 1.0;
        }
    }
    return out;
}

}  // namespace tuq
