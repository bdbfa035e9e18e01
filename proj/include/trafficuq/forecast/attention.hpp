#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "trafficuq/forecast/graph.hpp"

namespace tuq {

struct AttentionParams {
    Eigen::MatrixXd W;  // d' x d
    Eigen::VectorXd a;  // 2d'
    double gamma_raw = 0.0;
    double self_loop_bias = 0.0;
    double leaky_slope = 0.2;

    /// Effective gamma = softplus(gamma_raw).
    double gamma() const;
    void validate() const;
};

/// e_ij = LeakyReLU(a^T [W h_i || W h_j]).
double attention_logit(const Eigen::VectorXd& h_i, const Eigen::VectorXd& h_j, const AttentionParams& p);

/// Uncertainty-guided attention row over a neighborhood. logits and sigma are
/// aligned with the neighborhood order; self_pos marks node i inside it.
std::vector<double> pugat_attention(std::span<const double> logits, std::span<const double> sigma,
                                    std::size_t self_pos, const AttentionParams& p);

/// softmax(e / (1 + beta * sigma_i)). Neighbor uncertainties are not an input.
std::vector<double> temp_scaled_attention(std::span<const double> logits, double sigma_i, double beta);

/// alpha_ij / alpha_ik for non-self j, k.
double attention_ratio_closed_form(double e_ij, double e_ik, double gamma, double sigma_j, double sigma_k);

enum class Activation { Tanh, Relu, Elu, Identity };

Activation parse_activation(const std::string& name);

struct LayerParams {
    AttentionParams attention;
    Eigen::VectorXd w_sigma;  // d'
    double b_sigma = 0.0;
    Activation activation = Activation::Tanh;
};

struct LayerOutput {
    Eigen::MatrixXd features;  // N x d'
    std::vector<double> sigma;
};

/// One message-passing step: h'_i = act(sum_j alpha_ij W h_j),
/// sigma'_i = softplus(w_sigma^T h'_i + b_sigma). features is N x d.
LayerOutput layer_forward(const Eigen::MatrixXd& features, std::span<const double> sigma, const GraphTopology& g,
                          const LayerParams& p);

}  // namespace tuq
