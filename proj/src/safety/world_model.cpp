#include "trafficuq/safety/world_model.hpp"

#include <random>
#include <stdexcept>

#include "trafficuq/common/rng.hpp"

namespace tuq {

namespace {

Eigen::VectorXd design_row(const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
    Eigen::VectorXd x(s.size() + a.size() + 1);
    x << s, a, 1.0;
    return x;
}

std::vector<double> flat(const Eigen::MatrixXd& M) {
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(M.size()));
    for (Eigen::Index r = 0; r < M.rows(); ++r)
        for (Eigen::Index c = 0; c < M.cols(); ++c) out.push_back(M(r, c));
    return out;
}

}  // namespace

Eigen::VectorXd AffineMember::predict(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const {
    if (s.size() + a.size() + 1 != W.cols()) {
        throw std::invalid_argument("world model: state/action dimension mismatch");
    }
    return W * design_row(s, a);
}

Eigen::MatrixXd AffineMember::state_block() const { return W.leftCols(W.rows()); }

Eigen::MatrixXd AffineMember::action_block() const { return W.block(0, W.rows(), W.rows(), W.cols() - W.rows() - 1); }

Eigen::MatrixXd WorldModelEnsemble::mean_matrix() const {
    if (members.empty()) {
        throw std::invalid_argument("world model ensemble is empty");
    }
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(members[0].W.rows(), members[0].W.cols());
    for (const auto& mem : members) m += mem.W;
    return m / static_cast<double>(members.size());
}

WorldModelEnsemble fit_world_ensemble(const std::vector<Transition>& data, std::size_t members, std::uint64_t seed) {
    if (members == 0) {
        throw std::invalid_argument("fit_world_ensemble: need at least one member");
    }
    if (data.empty()) {
        throw std::invalid_argument("fit_world_ensemble: empty dataset");
    }
    const auto ds = data[0].s.size();
    const auto da = data[0].a.size();
    const auto p = ds + da + 1;
    if (data.size() < static_cast<std::size_t>(ds + da + 1)) {
        throw std::invalid_argument("fit_world_ensemble: dataset smaller than state+action dimension + 1");
    }
    Eigen::MatrixXd X(static_cast<Eigen::Index>(data.size()), p);
    Eigen::MatrixXd Y(static_cast<Eigen::Index>(data.size()), ds);
    for (std::size_t i = 0; i < data.size(); ++i) {
        const auto& tr = data[i];
        if (tr.s.size() != ds || tr.a.size() != da || tr.s_next.size() != ds) {
            throw std::invalid_argument("fit_world_ensemble: inconsistent transition dimensions");
        }
        X.row(static_cast<Eigen::Index>(i)) = design_row(tr.s, tr.a).transpose();
        Y.row(static_cast<Eigen::Index>(i)) = tr.s_next.transpose();
    }

    WorldModelEnsemble e;
    e.state_dim = static_cast<std::size_t>(ds);
    e.action_dim = static_cast<std::size_t>(da);
    const auto n = static_cast<Eigen::Index>(data.size());
    for (std::size_t k = 0; k < members; ++k) {
        const auto mseed = stream_seed(seed, "world_model/member/" + std::to_string(k));
        e.member_seeds.push_back(mseed);
        Rng rng(mseed);
        std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
        Eigen::MatrixXd Xb(n, p);
        Eigen::MatrixXd Yb(n, ds);
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto j = pick(rng);
            Xb.row(i) = X.row(j);
            Yb.row(i) = Y.row(j);
        }
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xb);
        Eigen::MatrixXd B;
        if (qr.rank() == p) {
            B = qr.solve(Yb);
        } else {
            e.ridge_used = true;
            const double scale = Xb.squaredNorm() / static_cast<double>(Xb.size());
            Eigen::MatrixXd G = Xb.transpose() * Xb;
            G.diagonal().array() += kRidgeFallback * std::max(scale, 1e-12) * static_cast<double>(n);
            B = G.ldlt().solve(Xb.transpose() * Yb);
        }
        e.members.push_back(AffineMember{B.transpose()});
    }
    return e;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> ensemble_predict(const WorldModelEnsemble& e, const Eigen::VectorXd& s,
                                                             const Eigen::VectorXd& a) {
    if (e.members.empty()) {
        throw std::invalid_argument("ensemble_predict: empty ensemble");
    }
    std::vector<Eigen::VectorXd> outs;
    outs.reserve(e.members.size());
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(e.members[0].W.rows()));
    for (const auto& m : e.members) {
        outs.push_back(m.predict(s, a));
        mu += outs.back();
    }
    const double M = static_cast<double>(e.members.size());
    mu /= M;
    Eigen::VectorXd var = Eigen::VectorXd::Zero(mu.size());
    for (const auto& o : outs) var.array() += (o - mu).array().square();
    return {mu, (var / M).cwiseSqrt()};
}

double model_error(const WorldModelEnsemble& e, const std::vector<Transition>& holdout, double eps_floor) {
    if (holdout.empty()) {
        throw std::invalid_argument("model_error: empty holdout");
    }
    const Eigen::MatrixXd Wm = e.mean_matrix();
    double acc = 0.0;
    for (const auto& tr : holdout) {
        const Eigen::VectorXd pred = Wm * design_row(tr.s, tr.a);
        acc += (tr.s_next - pred).norm() / (tr.s_next.norm() + eps_floor);
    }
    return acc / static_cast<double>(holdout.size());
}

Json WorldModelEnsemble::to_json() const {
    Json j;
    j["state_dim"] = state_dim;
    j["action_dim"] = action_dim;
    j["eps_model"] = eps_model;
    j["eps_floor"] = eps_floor;
    j["ridge_used"] = ridge_used;
    j["member_seeds"] = member_seeds;
    Json arr = Json::array();
    for (const auto& m : members) arr.push_back(flat(m.W));
    j["members"] = std::move(arr);
    return j;
}

WorldModelEnsemble WorldModelEnsemble::from_json(const Json& j) {
    WorldModelEnsemble e;
    e.state_dim = j.at("state_dim").get<std::size_t>();
    e.action_dim = j.at("action_dim").get<std::size_t>();
    e.eps_model = j.at("eps_model").get<double>();
    e.eps_floor = j.at("eps_floor").get<double>();
    e.ridge_used = j.at("ridge_used").get<bool>();
    e.member_seeds = j.at("member_seeds").get<std::vector<std::uint64_t>>();
    const auto rows = static_cast<Eigen::Index>(e.state_dim);
    const auto cols = static_cast<Eigen::Index>(e.state_dim + e.action_dim + 1);
    for (const auto& m : j.at("members")) {
        const auto v = m.get<std::vector<double>>();
        if (static_cast<Eigen::Index>(v.size()) != rows * cols) {
            throw std::invalid_argument("world model JSON: member matrix has wrong size");
        }
        AffineMember mem{Eigen::MatrixXd(rows, cols)};
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) mem.W(r, c) = v[static_cast<std::size_t>(r * cols + c)];
        e.members.push_back(std::move(mem));
    }
    return e;
}

}  // namespace tuq
