#include "trafficuq/conformal/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "trafficuq/common/math.hpp"
#include "trafficuq/common/rng.hpp"

namespace tuq {

std::vector<std::size_t> ClusterAssignment::sizes() const {
    std::vector<std::size_t> out(K, 0);
    for (int l : labels) {
        ++out[static_cast<std::size_t>(l)];
    }
    return out;
}

std::vector<ErrorStats> node_error_stats(const Panel& residuals) {
    std::vector<ErrorStats> out(residuals.nodes);
    for (std::size_t n = 0; n < residuals.nodes; ++n) {
        auto col = residuals.column(n);
        for (double& v : col) {
            v = std::abs(v);
        }
        out[n] = {mean(col), sample_stddev(col), skewness(col)};
    }
    return out;
}

namespace {

double dist2(const ErrorStats& a, const ErrorStats& b) {
    double d = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        d += (a[k] - b[k]) * (a[k] - b[k]);
    }
    return d;
}

}  // namespace

ClusterAssignment cluster_nodes(const std::vector<ErrorStats>& stats, std::size_t K, std::uint64_t seed,
                                std::size_t max_iter) {
    const std::size_t N = stats.size();
    if (K == 0) {
        throw std::invalid_argument("cluster_nodes: K must be positive");
    }
    if (K > N) {
        throw std::invalid_argument("cluster_nodes: K exceeds node count");
    }
    for (const auto& s : stats) {
        for (double v : s) {
            if (!std::isfinite(v)) {
                throw std::invalid_argument("cluster_nodes: statistics must be finite");
            }
        }
    }
    // Standardize each statistic so that no single scale dominates the distance.
    std::vector<ErrorStats> x = stats;
    for (std::size_t k = 0; k < 3; ++k) {
        std::vector<double> col(N);
        for (std::size_t i = 0; i < N; ++i) col[i] = stats[i][k];
        const double m = mean(col);
        const double sd = sample_stddev(col);
        for (std::size_t i = 0; i < N; ++i) x[i][k] = sd > 1e-12 ? (stats[i][k] - m) / sd : 0.0;
    }

    auto rng = make_rng(seed, "cluster_nodes");
    std::vector<ErrorStats> centers;
    centers.push_back(x[std::uniform_int_distribution<std::size_t>(0, N - 1)(rng)]);
    std::vector<double> d2(N, std::numeric_limits<double>::infinity());
    while (centers.size() < K) {
        double total = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            d2[i] = std::min(d2[i], dist2(x[i], centers.back()));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            for (pick = 0; pick + 1 < N; ++pick) {
                u -= d2[pick];
                if (u < 0.0) break;
            }
        } else {
            pick = std::uniform_int_distribution<std::size_t>(0, N - 1)(rng);
        }
        centers.push_back(x[pick]);
    }

    std::vector<int> labels(N, -1);
    for (std::size_t iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < N; ++i) {
            int best = 0;
            double bd = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < K; ++c) {
                const double d = dist2(x[i], centers[c]);
                if (d < bd) {
                    bd = d;
                    best = static_cast<int>(c);
                }
            }
            changed |= labels[i] != best;
            labels[i] = best;
        }
        // Repair empty clusters by moving the farthest member of the largest one.
        for (std::size_t c = 0; c < K; ++c) {
            std::vector<std::size_t> size(K, 0);
            for (int l : labels) ++size[static_cast<std::size_t>(l)];
            if (size[c] > 0) continue;
            const auto largest = static_cast<int>(std::max_element(size.begin(), size.end()) - size.begin());
            std::size_t far = 0;
            double fd = -1.0;
            for (std::size_t i = 0; i < N; ++i) {
                if (labels[i] == largest) {
                    const double d = dist2(x[i], centers[static_cast<std::size_t>(largest)]);
                    if (d > fd) {
                        fd = d;
                        far = i;
                    }
                }
            }
            labels[far] = static_cast<int>(c);
            changed = true;
        }
        std::vector<ErrorStats> sum(K, ErrorStats{0, 0, 0});
        std::vector<std::size_t> count(K, 0);
        for (std::size_t i = 0; i < N; ++i) {
            const auto l = static_cast<std::size_t>(labels[i]);
            for (std::size_t k = 0; k < 3; ++k) sum[l][k] += x[i][k];
            ++count[l];
        }
        for (std::size_t c = 0; c < K; ++c) {
            for (std::size_t k = 0; k < 3; ++k) centers[c][k] = sum[c][k] / static_cast<double>(count[c]);
        }
        if (!changed) break;
    }

    ClusterAssignment out;
    out.K = K;
    out.labels = labels;
    out.centroids.assign(K, ErrorStats{0, 0, 0});
    const auto sz = out.sizes();
    for (std::size_t i = 0; i < N; ++i) {
        const auto l = static_cast<std::size_t>(labels[i]);
        for (std::size_t k = 0; k < 3; ++k) out.centroids[l][k] += stats[i][k] / static_cast<double>(sz[l]);
    }
    return out;
}

}  // namespace tuq
