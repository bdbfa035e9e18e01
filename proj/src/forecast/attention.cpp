#include "trafficuq/forecast/attention.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "trafficuq/common/math.hpp"

namespace tuq {

double AttentionParams::gamma() const { return softplus(gamma_raw); }

void AttentionParams::validate() const {
    if (a.size() != 2 * W.rows()) {
        throw std::invalid_argument("attention vector must have length 2 * rows(W)");
    }
    if (!(leaky_slope > 0.0)) {
        throw std::invalid_argument("leaky slope must be positive");
    }
    if (!W.allFinite() || !a.allFinite() || !std::isfinite(gamma_raw) || !std::isfinite(self_loop_bias)) {
        throw std::invalid_argument("attention parameters must be finite");
    }
}

double attention_logit(const Eigen::VectorXd& h_i, const Eigen::VectorXd& h_j, const AttentionParams& p) {
    if (h_i.size() != p.W.cols() || h_j.size() != p.W.cols() || p.a.size() != 2 * p.W.rows()) {
        throw std::invalid_argument("attention_logit: dimension mismatch");
    }
    const auto dp = p.W.rows();
    const double raw = p.a.head(dp).dot(p.W * h_i) + p.a.tail(dp).dot(p.W * h_j);
    return leaky_relu(raw, p.leaky_slope);
}

std::vector<double> pugat_attention(std::span<const double> logits, std::span<const double> sigma,
                                    std::size_t self_pos, const AttentionParams& p) {
    if (logits.empty()) {
        throw std::invalid_argument("pugat_attention: empty neighborhood");
    }
    if (sigma.size() != logits.size() || self_pos >= logits.size()) {
        throw std::invalid_argument("pugat_attention: row size mismatch");
    }
    for (double s : sigma) {
        if (!(s > 0.0)) {
            throw std::invalid_argument("pugat_attention: uncertainties must be positive");
        }
    }
    const double gamma = p.gamma();
    const double sigma_i = sigma[self_pos];
    std::vector<double> shifted(logits.size());
    for (std::size_t j = 0; j < logits.size(); ++j) {
        shifted[j] = logits[j] + gamma * (sigma_i - sigma[j]) + (j == self_pos ? p.self_loop_bias : 0.0);
    }
    return softmax(shifted);
}

std::vector<double> temp_scaled_attention(std::span<const double> logits, double sigma_i, double beta) {
    if (!(sigma_i > 0.0) || !(beta >= 0.0)) {
        throw std::invalid_argument("temp_scaled_attention: need sigma_i > 0 and beta >= 0");
    }
    const double temperature = 1.0 + beta * sigma_i;
    std::vector<double> scaled(logits.begin(), logits.end());
    for (double& v : scaled) {
        v /= temperature;
    }
    return softmax(scaled);
}

double attention_ratio_closed_form(double e_ij, double e_ik, double gamma, double sigma_j, double sigma_k) {
    return std::exp((e_ij - e_ik) + gamma * (sigma_k - sigma_j));
}

Activation parse_activation(const std::string& name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    if (name == "elu") return Activation::Elu;
    if (name == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + name);
}

namespace {

double activate(double x, Activation act) {
    switch (act) {
        case Activation::Tanh: return std::tanh(x);
        case Activation::Relu: return x > 0.0 ? x : 0.0;
        case Activation::Elu: return x > 0.0 ? x : std::expm1(x);
        case Activation::Identity: return x;
    }
    return x;
}

}  // namespace

LayerOutput layer_forward(const Eigen::MatrixXd& features, std::span<const double> sigma, const GraphTopology& g,
                          const LayerParams& p) {
    p.attention.validate();
    const auto n = static_cast<Eigen::Index>(g.node_count());
    if (features.rows() != n || static_cast<Eigen::Index>(sigma.size()) != n) {
        throw std::invalid_argument("layer_forward: features/sigma must have one row per node");
    }
    if (features.cols() != p.attention.W.cols() || p.w_sigma.size() != p.attention.W.rows()) {
        throw std::invalid_argument("layer_forward: dimension mismatch");
    }
    const Eigen::Index dp = p.attention.W.rows();
    const Eigen::MatrixXd projected = features * p.attention.W.transpose();  // N x d'
    const Eigen::VectorXd src_term = projected * p.attention.a.head(dp);
    const Eigen::VectorXd dst_term = projected * p.attention.a.tail(dp);

    LayerOutput out;
    out.features.resize(n, dp);
    out.sigma.resize(sigma.size());
    std::vector<double> logits;
    std::vector<double> nb_sigma;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& nb = g.neighborhoods[static_cast<std::size_t>(i)];
        logits.resize(nb.size());
        nb_sigma.resize(nb.size());
        for (std::size_t q = 0; q < nb.size(); ++q) {
            const auto j = static_cast<Eigen::Index>(nb[q]);
            logits[q] = leaky_relu(src_term(i) + dst_term(j), p.attention.leaky_slope);
            nb_sigma[q] = sigma[nb[q]];
        }
        const auto alpha = pugat_attention(logits, nb_sigma, g.self_position(static_cast<std::size_t>(i)), p.attention);
        Eigen::VectorXd agg = Eigen::VectorXd::Zero(dp);
        for (std::size_t q = 0; q < nb.size(); ++q) {
            agg += alpha[q] * projected.row(static_cast<Eigen::Index>(nb[q])).transpose();
        }
        for (Eigen::Index c = 0; c < dp; ++c) {
            out.features(i, c) = activate(agg(c), p.activation);
        }
        out.sigma[static_cast<std::size_t>(i)] = softplus(p.w_sigma.dot(out.features.row(i).transpose()) + p.b_sigma);
    }
    return out;
}

}  // namespace tuq
