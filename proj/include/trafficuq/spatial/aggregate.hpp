#pragma once

#include <span>
#include <string>
#include <vector>

#include "trafficuq/spatial/coverage_map.hpp"
#include "trafficuq/spatial/covariance.hpp"

namespace tuq {

/// mu_int_j = sum_i w_ij mu_i.
std::vector<double> aggregate_mean(std::span<const double> mu, const CoverageMap& map);

/// sigma_int_j = sqrt(max(0, sum_ik w_ij w_kj rho_ik sigma_i sigma_k)).
std::vector<double> aggregate_variance(std::span<const double> sigma, const CoverageMap& map,
                                       const CovarianceModel& model);

enum class PValueRule { Min, WeightedGeometric };

PValueRule parse_pvalue_rule(const std::string& name);

/// Min over covered cells, or exp(sum_i w_ij log p_i).
std::vector<double> aggregate_pvalues(std::span<const double> p, const CoverageMap& map,
                                      PValueRule rule = PValueRule::Min);

/// 1 for an intersection when any covered cell is in the rejection mask.
std::vector<double> aggregate_flags(const std::vector<bool>& rejected, const CoverageMap& map);

}  // namespace tuq
