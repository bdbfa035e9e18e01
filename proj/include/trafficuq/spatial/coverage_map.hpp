#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "trafficuq/common/io.hpp"

namespace tuq {

/// Axis-aligned rectangle in km, x0 < x1 and y0 < y1.
struct Rect {
    double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
    double area() const { return (x1 - x0) * (y1 - y0); }
    std::array<double, 2> centre() const { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
};

double overlap_area(const Rect& a, const Rect& b);

struct CoverageMap {
    std::vector<Rect> cells;
    std::vector<Rect> areas;                  // one coverage rectangle per intersection
    std::vector<std::vector<double>> weights;  // [intersection][cell]
    std::vector<std::vector<std::size_t>> covered;  // cells with positive weight, ascending

    std::size_t intersection_count() const { return areas.size(); }
    std::size_t cell_count() const { return cells.size(); }

    Json to_json() const;
    static CoverageMap from_json(const Json& j);
};

/// w_ij = |cell_i intersect A_j| / |A_j|. Rejects areas that are empty or not
/// fully covered by the cells.
CoverageMap coverage_weights(std::span<const Rect> cells, std::span<const Rect> areas);

}  // namespace tuq
