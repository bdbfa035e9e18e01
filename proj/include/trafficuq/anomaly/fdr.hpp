#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tuq {

struct RejectionSet {
    std::vector<bool> mask;
    std::size_t k_star = 0;
    double c_m = 1.0;
    double threshold = 0.0;  // largest rejected p-value cutoff k* alpha / (m c_m)

    std::size_t count() const { return k_star; }
};

enum class FdrProcedure { BH, BY };

FdrProcedure parse_fdr_procedure(const std::string& name);

/// Step-up: reject the k* smallest, k* = max{k : p_(k) <= k alpha / m}.
RejectionSet bh_procedure(std::span<const double> p, double alpha);

/// As BH with alpha replaced by alpha / H_m.
RejectionSet by_procedure(std::span<const double> p, double alpha);

RejectionSet run_fdr(FdrProcedure proc, std::span<const double> p, double alpha);

struct FdrOutcome {
    double fdr = 0.0;
    double power = 0.0;
};

/// FDR = false / max(rejections, 1); power = true rejections / anomalies (0 if none).
FdrOutcome empirical_fdr(const std::vector<bool>& rejected, const std::vector<bool>& truth);

}  // namespace tuq
