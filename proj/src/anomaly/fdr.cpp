#include "trafficuq/anomaly/fdr.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "trafficuq/common/math.hpp"

namespace tuq {

FdrProcedure parse_fdr_procedure(const std::string& name) {
    if (name == "bh" || name == "BH") return FdrProcedure::BH;
    if (name == "by" || name == "BY") return FdrProcedure::BY;
    throw std::invalid_argument("unknown FDR procedure: " + name);
}

namespace {

RejectionSet step_up(std::span<const double> p, double alpha, double c_m) {
    const std::size_t m = p.size();
    RejectionSet r;
    r.c_m = c_m;
    r.mask.assign(m, false);
    if (m == 0) {
        return r;
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return p[a] < p[b] || (p[a] == p[b] && a < b);
    });
    const double scale = alpha / (static_cast<double>(m) * c_m);
    for (std::size_t k = m; k >= 1; --k) {
        if (p[order[k - 1]] <= static_cast<double>(k) * scale) {
            r.k_star = k;
            break;
        }
    }
    r.threshold = static_cast<double>(r.k_star) * scale;
    for (std::size_t k = 0; k < r.k_star; ++k) {
        r.mask[order[k]] = true;
    }
    return r;
}

void check_p(std::span<const double> p) {
    for (double v : p) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("FDR procedure: p-values must lie in [0, 1]");
        }
    }
}

}  // namespace

RejectionSet bh_procedure(std::span<const double> p, double alpha) {
    check_p(p);
    return step_up(p, alpha, 1.0);
}

RejectionSet by_procedure(std::span<const double> p, double alpha) {
    check_p(p);
    return step_up(p, alpha, harmonic_number(p.size()));
}

RejectionSet run_fdr(FdrProcedure proc, std::span<const double> p, double alpha) {
    return proc == FdrProcedure::BH ? bh_procedure(p, alpha) : by_procedure(p, alpha);
}

FdrOutcome empirical_fdr(const std::vector<bool>& rejected, const std::vector<bool>& truth) {
    if (rejected.size() != truth.size()) {
        throw std::invalid_argument("empirical_fdr: mask length mismatch");
    }
    std::size_t r = 0, v = 0, tp = 0, anomalies = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        r += rejected[i];
        v += rejected[i] && !truth[i];
        tp += rejected[i] && truth[i];
        anomalies += truth[i];
    }
    FdrOutcome out;
    out.fdr = static_cast<double>(v) / static_cast<double>(std::max<std::size_t>(r, 1));
    out.power = anomalies == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(anomalies);
    return out;
}

}  // namespace tuq
