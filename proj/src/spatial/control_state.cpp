#include "trafficuq/spatial/control_state.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace tuq {

std::array<double, 4> clock_encoding(std::size_t tick, std::size_t ticks_per_day, std::size_t days_per_week) {
    if (ticks_per_day == 0 || days_per_week == 0) {
        throw std::invalid_argument("clock_encoding: period must be positive");
    }
    const double two_pi = 2.0 * std::numbers::pi;
    const double day = two_pi * static_cast<double>(tick % ticks_per_day) / static_cast<double>(ticks_per_day);
    const std::size_t week_len = ticks_per_day * days_per_week;
    const double week = two_pi * static_cast<double>(tick % week_len) / static_cast<double>(week_len);
    return {std::sin(day), std::cos(day), std::sin(week), std::cos(week)};
}

std::vector<std::string> ControlStateLayout::names() const {
    std::vector<std::string> out;
    for (std::size_t j = 0; j < intersections; ++j) {
        const auto s = std::to_string(j);
        out.insert(out.end(), {"queue_ns_" + s, "queue_ew_" + s, "wait_" + s, "throughput_" + s});
    }
    for (const char* part : {"mu_int_", "sigma_int_", "p_int_", "flag_"}) {
        for (std::size_t j = 0; j < intersections; ++j) out.push_back(part + std::to_string(j));
    }
    out.insert(out.end(), {"tod_sin", "tod_cos", "dow_sin", "dow_cos"});
    return out;
}

Eigen::VectorXd assemble_state(std::span<const double> local, std::span<const double> mu_int,
                               std::span<const double> sigma_int, std::span<const double> p_int,
                               std::span<const double> flags, const std::array<double, 4>& clock,
                               const ControlStateLayout& layout) {
    const std::size_t n = layout.intersections;
    if (local.size() != ControlStateLayout::kLocalPerIntersection * n || mu_int.size() != n ||
        sigma_int.size() != n || p_int.size() != n || flags.size() != n) {
        throw std::invalid_argument("assemble_state: component sizes do not match layout");
    }
    Eigen::VectorXd s(static_cast<Eigen::Index>(layout.dim()));
    Eigen::Index k = 0;
    for (double v : local) s(k++) = v;
    for (double v : mu_int) s(k++) = v;
    for (double v : sigma_int) {
        if (v < 0.0) throw std::invalid_argument("assemble_state: sigma_int must be nonnegative");
        s(k++) = v;
    }
    for (double v : p_int) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("assemble_state: p_int outside [0, 1]");
        s(k++) = v;
    }
    for (double v : flags) {
        if (v != 0.0 && v != 1.0) throw std::invalid_argument("assemble_state: flags must be 0 or 1");
        s(k++) = v;
    }
    for (double v : clock) s(k++) = v;
    return s;
}

}  // namespace tuq
