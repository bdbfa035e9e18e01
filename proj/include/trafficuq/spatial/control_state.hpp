#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace tuq {

/// [sin, cos] of time-of-day then [sin, cos] of day-of-week, phase 0 at
/// midnight Monday.
std::array<double, 4> clock_encoding(std::size_t tick, std::size_t ticks_per_day, std::size_t days_per_week = 7);

/// Layout v1, for n intersections:
///   [0, 4n)   local: per intersection (queue_ns, queue_ew, wait_s, throughput)
///   [4n, 5n)  mu_int   [5n, 6n) sigma_int   [6n, 7n) p_int   [7n, 8n) flags
///   [8n, 8n+4) clock
struct ControlStateLayout {
    static constexpr const char* kVersion = "v1";
    static constexpr std::size_t kLocalPerIntersection = 4;
    std::size_t intersections = 16;

    std::size_t dim() const { return 8 * intersections + 4; }
    std::size_t local_offset() const { return 0; }
    std::size_t mu_offset() const { return 4 * intersections; }
    std::size_t sigma_offset() const { return 5 * intersections; }
    std::size_t p_offset() const { return 6 * intersections; }
    std::size_t flag_offset() const { return 7 * intersections; }
    std::size_t clock_offset() const { return 8 * intersections; }
    std::vector<std::string> names() const;
};

Eigen::VectorXd assemble_state(std::span<const double> local, std::span<const double> mu_int,
                               std::span<const double> sigma_int, std::span<const double> p_int,
                               std::span<const double> flags, const std::array<double, 4>& clock,
                               const ControlStateLayout& layout);

}  // namespace tuq
