#include <algorithm>
#include <stdexcept>

#include "trafficuq/conformal/calibration.hpp"

namespace tuq {

Json CalibrationLedger::to_json() const {
    Json j;
    j["alpha"] = alpha;
    j["gamma_aci"] = gamma_aci;
    j["tau_gap"] = tau_gap;
    j["aci_sign"] = sign == AciSign::Standard ? "standard" : "appendix";
    j["K"] = clusters.K;
    j["labels"] = clusters.labels;
    Json cl = Json::array();
    for (std::size_t c = 0; c < per_cluster.size(); ++c) {
        Json e;
        e["id"] = c;
        e["centroid"] = {clusters.centroids[c][0], clusters.centroids[c][1], clusters.centroids[c][2]};
        e["alpha_t"] = per_cluster[c].alpha_t;
        e["quantile"] = json_number(per_cluster[c].quantile());
        e["scores"] = per_cluster[c].scores;
        cl.push_back(std::move(e));
    }
    j["clusters"] = std::move(cl);
    return j;
}

CalibrationLedger CalibrationLedger::from_json(const Json& j) {
    CalibrationLedger L;
    L.alpha = j.at("alpha").get<double>();
    L.gamma_aci = j.at("gamma_aci").get<double>();
    L.tau_gap = j.at("tau_gap").get<std::size_t>();
    const auto sign = j.at("aci_sign").get<std::string>();
    if (sign != "standard" && sign != "appendix") {
        throw std::invalid_argument("ledger: unknown aci_sign " + sign);
    }
    L.sign = sign == "standard" ? AciSign::Standard : AciSign::Appendix;
    L.clusters.K = j.at("K").get<std::size_t>();
    L.clusters.labels = j.at("labels").get<std::vector<int>>();
    for (const auto& e : j.at("clusters")) {
        const auto c = e.at("centroid").get<std::vector<double>>();
        if (c.size() != 3) {
            throw std::invalid_argument("ledger: centroid must have 3 entries");
        }
        L.clusters.centroids.push_back({c[0], c[1], c[2]});
        ClusterCalibration pc;
        pc.alpha_t = e.at("alpha_t").get<double>();
        pc.scores = e.at("scores").get<std::vector<double>>();
        if (pc.scores.empty() || !std::is_sorted(pc.scores.begin(), pc.scores.end())) {
            throw std::invalid_argument("ledger: cluster scores must be nonempty and sorted");
        }
        L.per_cluster.push_back(std::move(pc));
    }
    if (L.per_cluster.size() != L.clusters.K) {
        throw std::invalid_argument("ledger: cluster count does not match K");
    }
    for (int l : L.clusters.labels) {
        if (l < 0 || static_cast<std::size_t>(l) >= L.clusters.K) {
            throw std::invalid_argument("ledger: label out of range");
        }
    }
    return L;
}

}  // namespace tuq
