#include "trafficuq/anomaly/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "trafficuq/anomaly/fdr.hpp"
#include "trafficuq/common/math.hpp"
#include "trafficuq/common/rng.hpp"

namespace tuq {

double within_block_correlation(const Panel& p, std::size_t block_len) {
    if (block_len < 2) {
        return 0.0;
    }
    const std::size_t blocks = p.steps / block_len;
    if (blocks == 0) {
        throw std::invalid_argument("within_block_correlation: panel shorter than one block");
    }
    const double mu = mean(p.values);
    double var = 0.0;
    for (double v : p.values) var += (v - mu) * (v - mu);
    var /= static_cast<double>(p.values.size());
    if (!(var > 0.0)) {
        return 0.0;
    }
    double cov = 0.0;
    double pairs = 0.0;
    std::vector<double> colsum(p.nodes);
    for (std::size_t b = 0; b < blocks; ++b) {
        std::fill(colsum.begin(), colsum.end(), 0.0);
        double sq = 0.0;
        for (std::size_t t = b * block_len; t < (b + 1) * block_len; ++t) {
            for (std::size_t n = 0; n < p.nodes; ++n) {
                const double d = p.at(t, n) - mu;
                colsum[n] += d;
                sq += d * d;
            }
        }
        // sum over t != t' of d_t d_t' = (sum d)^2 - sum d^2
        double cross = -sq;
        for (double s : colsum) cross += s * s;
        cov += cross;
        pairs += static_cast<double>(p.nodes * block_len * (block_len - 1));
    }
    return cov / pairs / var;
}

namespace {

double quantile95(std::vector<double> v) { return empirical_quantile(std::move(v), 0.95); }

}  // namespace

DependenceReport block_bootstrap_verify(const Panel& pvalues, const std::optional<Panel>& truth,
                                        const GraphTopology& g, const BootstrapConfig& cfg) {
    if (cfg.replicates < 100) {
        throw std::invalid_argument("block_bootstrap_verify: need at least 100 replicates");
    }
    if (cfg.time_blocks.empty() || cfg.space_hops.empty()) {
        throw std::invalid_argument("block_bootstrap_verify: empty block grid");
    }
    const std::size_t max_bt = *std::max_element(cfg.time_blocks.begin(), cfg.time_blocks.end());
    if (pvalues.steps < max_bt || pvalues.nodes < 2) {
        throw std::invalid_argument("block_bootstrap_verify: panel of " + std::to_string(pvalues.steps) +
                                    " rows is smaller than the largest time block " + std::to_string(max_bt));
    }
    if (g.node_count() != pvalues.nodes) {
        throw std::invalid_argument("block_bootstrap_verify: topology does not match panel width");
    }
    if (truth && (truth->steps != pvalues.steps || truth->nodes != pvalues.nodes)) {
        throw std::invalid_argument("block_bootstrap_verify: truth mask shape mismatch");
    }
    for (double v : pvalues.values) {
        if (!(v >= 0.0 && v <= 1.0)) {
            throw std::invalid_argument("block_bootstrap_verify: p-values must lie in [0, 1]");
        }
    }

    const std::size_t T = pvalues.steps;
    const std::size_t m = pvalues.nodes;
    DependenceReport report;
    report.alpha = cfg.alpha;
    report.replicates = cfg.replicates;

    std::vector<std::vector<std::size_t>> dist(m);
    for (std::size_t i = 0; i < m; ++i) {
        dist[i] = hop_distances(g, i);
    }

    for (std::size_t bt : cfg.time_blocks) {
        const std::size_t rows = std::max(bt, std::min(T, cfg.max_rows) / bt * bt);
        report.rows_per_replicate = std::max(report.rows_per_replicate, rows);
        for (std::size_t bs : cfg.space_hops) {
            std::vector<std::vector<std::size_t>> balls(m);
            for (std::size_t i = 0; i < m; ++i) {
                for (std::size_t j = 0; j < m; ++j) {
                    if (dist[i][j] <= bs) balls[i].push_back(j);
                }
            }
            std::vector<double> fdr_bh(cfg.replicates), fdr_by(cfg.replicates);
            double rho_acc = 0.0;
            for (std::size_t b = 0; b < cfg.replicates; ++b) {
                auto rng = make_rng(cfg.seed, "bootstrap/" + std::to_string(bt) + "/" + std::to_string(bs) + "/" +
                                                  std::to_string(b));
                std::uniform_int_distribution<std::size_t> start_t(0, T - bt);
                std::uniform_int_distribution<std::size_t> centre(0, m - 1);
                std::vector<std::size_t> cols;
                cols.reserve(m);
                while (cols.size() < m) {
                    for (auto j : balls[centre(rng)]) {
                        if (cols.size() == m) break;
                        cols.push_back(j);
                    }
                }
                std::vector<std::size_t> time_idx;
                time_idx.reserve(rows);
                while (time_idx.size() < rows) {
                    const auto s = start_t(rng);
                    for (std::size_t k = 0; k < bt && time_idx.size() < rows; ++k) time_idx.push_back(s + k);
                }
                Panel rep(rows, m);
                std::vector<bool> tmask(m);
                double sum_bh = 0.0, sum_by = 0.0;
                for (std::size_t r = 0; r < rows; ++r) {
                    for (std::size_t c = 0; c < m; ++c) {
                        rep.at(r, c) = pvalues.at(time_idx[r], cols[c]);
                        tmask[c] = truth ? truth->at(time_idx[r], cols[c]) > 0.5 : false;
                    }
                    sum_bh += empirical_fdr(bh_procedure(rep.row(r), cfg.alpha).mask, tmask).fdr;
                    sum_by += empirical_fdr(by_procedure(rep.row(r), cfg.alpha).mask, tmask).fdr;
                }
                fdr_bh[b] = sum_bh / static_cast<double>(rows);
                fdr_by[b] = sum_by / static_cast<double>(rows);
                rho_acc += within_block_correlation(rep, bt);
            }
            BlockReport br;
            br.time_block = bt;
            br.space_hops = bs;
            br.rho_block = rho_acc / static_cast<double>(cfg.replicates);
            br.fdr_mean_bh = mean(fdr_bh);
            br.fdr_q95_bh = quantile95(fdr_bh);
            br.fdr_mean_by = mean(fdr_by);
            br.fdr_q95_by = quantile95(fdr_by);
            br.by_within_alpha = br.fdr_q95_by <= cfg.alpha;
            report.blocks.push_back(br);
        }
    }
    return report;
}

Json DependenceReport::to_json() const {
    Json j;
    j["alpha"] = alpha;
    j["replicates"] = replicates;
    j["rows_per_replicate"] = rows_per_replicate;
    Json arr = Json::array();
    for (const auto& b : blocks) {
        Json e;
        e["time_block"] = b.time_block;
        e["space_hops"] = b.space_hops;
        e["rho_block"] = b.rho_block;
        e["fdr_mean_bh"] = b.fdr_mean_bh;
        e["fdr_q95_bh"] = b.fdr_q95_bh;
        e["fdr_mean_by"] = b.fdr_mean_by;
        e["fdr_q95_by"] = b.fdr_q95_by;
        e["by_q95_within_alpha"] = b.by_within_alpha;
        arr.push_back(std::move(e));
    }
    j["blocks"] = std::move(arr);
    return j;
}

DependenceReport DependenceReport::from_json(const Json& j) {
    DependenceReport r;
    r.alpha = j.at("alpha").get<double>();
    r.replicates = j.at("replicates").get<std::size_t>();
    r.rows_per_replicate = j.at("rows_per_replicate").get<std::size_t>();
    for (const auto& e : j.at("blocks")) {
        BlockReport b;
        b.time_block = e.at("time_block").get<std::size_t>();
        b.space_hops = e.at("space_hops").get<std::size_t>();
        b.rho_block = e.at("rho_block").get<double>();
        b.fdr_mean_bh = e.at("fdr_mean_bh").get<double>();
        b.fdr_q95_bh = e.at("fdr_q95_bh").get<double>();
        b.fdr_mean_by = e.at("fdr_mean_by").get<double>();
        b.fdr_q95_by = e.at("fdr_q95_by").get<double>();
        b.by_within_alpha = e.at("by_q95_within_alpha").get<bool>();
        r.blocks.push_back(b);
    }
    return r;
}

}  // namespace tuq
