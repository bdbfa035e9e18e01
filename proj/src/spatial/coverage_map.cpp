#include "trafficuq/spatial/coverage_map.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace tuq {

double overlap_area(const Rect& a, const Rect& b) {
    const double w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
    const double h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
    return (w > 0.0 && h > 0.0) ? w * h : 0.0;
}

CoverageMap coverage_weights(std::span<const Rect> cells, std::span<const Rect> areas) {
    CoverageMap map;
    map.cells.assign(cells.begin(), cells.end());
    map.areas.assign(areas.begin(), areas.end());
    map.weights.assign(areas.size(), std::vector<double>(cells.size(), 0.0));
    map.covered.assign(areas.size(), {});
    for (std::size_t j = 0; j < areas.size(); ++j) {
        const double a = areas[j].area();
        if (!(a > 0.0)) {
            throw std::invalid_argument("coverage area " + std::to_string(j) + " has no area");
        }
        double total = 0.0;
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const double w = overlap_area(cells[i], areas[j]) / a;
            map.weights[j][i] = w;
            total += w;
            if (w > 0.0) {
                map.covered[j].push_back(i);
            }
        }
        if (map.covered[j].empty()) {
            throw std::invalid_argument("coverage area " + std::to_string(j) + " is not covered by any cell");
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw std::invalid_argument("coverage area " + std::to_string(j) + " is only partly covered by cells (" +
                                        std::to_string(total) + ")");
        }
    }
    return map;
}

namespace {

Json rect_json(const Rect& r) { return Json::array({r.x0, r.y0, r.x1, r.y1}); }

Rect rect_from(const Json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 4) {
        throw std::invalid_argument("rectangle must have 4 coordinates");
    }
    return {v[0], v[1], v[2], v[3]};
}

}  // namespace

Json CoverageMap::to_json() const {
    Json j;
    Json c = Json::array();
    for (const auto& r : cells) c.push_back(rect_json(r));
    Json a = Json::array();
    for (const auto& r : areas) a.push_back(rect_json(r));
    j["cells"] = std::move(c);
    j["areas"] = std::move(a);
    Json w = Json::array();
    for (std::size_t k = 0; k < areas.size(); ++k) {
        Json row = Json::array();
        for (auto i : covered[k]) row.push_back(Json::array({i, weights[k][i]}));
        w.push_back(std::move(row));
    }
    j["weights"] = std::move(w);
    return j;
}

CoverageMap CoverageMap::from_json(const Json& j) {
    std::vector<Rect> cells, areas;
    for (const auto& r : j.at("cells")) cells.push_back(rect_from(r));
    for (const auto& r : j.at("areas")) areas.push_back(rect_from(r));
    return coverage_weights(cells, areas);
}

}  // namespace tuq
