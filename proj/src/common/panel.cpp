#include "trafficuq/common/panel.hpp"

#include <algorithm>
#include <stdexcept>

namespace tuq {

std::vector<double> Panel::column(std::size_t n) const {
    std::vector<double> out(steps);
    for (std::size_t t = 0; t < steps; ++t) {
        out[t] = at(t, n);
    }
    return out;
}

Panel Panel::slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > steps) {
        throw std::invalid_argument("Panel::slice: bad row range");
    }
    Panel out(end - begin, nodes);
    std::copy(values.begin() + static_cast<std::ptrdiff_t>(begin * nodes),
              values.begin() + static_cast<std::ptrdiff_t>(end * nodes), out.values.begin());
    return out;
}

}  // namespace tuq
