#include "trafficuq/forecast/het_predictor.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tuq {

namespace {

Eigen::MatrixXd standardize(const HetPredictor& m, const Eigen::MatrixXd& X) {
    return (X.rowwise() - m.x_mean.transpose()).array().rowwise() / m.x_scale.transpose().array();
}

struct Params {
    Eigen::VectorXd w;
    double b;
    Eigen::VectorXd v;
    double c;
};

Params get_params(const HetPredictor& m) { return {m.w_mu, m.b_mu, m.w_log_sigma, m.b_log_sigma}; }

void set_params(HetPredictor& m, const Params& p) {
    m.w_mu = p.w;
    m.b_mu = p.b;
    m.w_log_sigma = p.v;
    m.b_log_sigma = p.c;
}

// Loss and gradient on already-standardized features Z.
double loss_and_grad(const HetPredictor& m, const Eigen::MatrixXd& Z, const Eigen::VectorXd& y, Params* grad) {
    const auto n = static_cast<double>(Z.rows());
    const Eigen::VectorXd mu = (m.y_mean + m.y_scale * ((Z * m.w_mu).array() + m.b_mu)).matrix();
    const Eigen::ArrayXd ls = (Z * m.w_log_sigma).array() + m.b_log_sigma;
    const Eigen::ArrayXd e = ls.exp();
    const Eigen::ArrayXd sigma = e + m.sigma_floor;
    const Eigen::ArrayXd log_sigma = sigma.log();
    const Eigen::ArrayXd r = y.array() - mu.array();
    const Eigen::ArrayXd r2s = r.square() / sigma.square();
    const double loss = (0.5 * r2s + log_sigma).mean() + m.lambda_sigma * log_sigma.square().mean();
    if (grad != nullptr) {
        // d/dmu' = -(r / sigma^2) * y_scale
        const Eigen::VectorXd g_mu = (-(r / sigma.square()) * m.y_scale / n).matrix();
        // d/dls = (1 - r^2/sigma^2 + 2 lambda log sigma) * e / sigma
        const Eigen::VectorXd g_ls = ((1.0 - r2s + 2.0 * m.lambda_sigma * log_sigma) * e / sigma / n).matrix();
        grad->w = Z.transpose() * g_mu;
        grad->b = g_mu.sum();
        grad->v = Z.transpose() * g_ls;
        grad->c = g_ls.sum();
    }
    return loss;
}

}  // namespace

std::pair<double, double> HetPredictor::predict(std::span<const double> x) const {
    if (x.size() != input_dim()) {
        throw std::invalid_argument("HetPredictor::predict: dimension mismatch");
    }
    double mu_std = b_mu;
    double ls = b_log_sigma;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const auto ki = static_cast<Eigen::Index>(k);
        const double z = (x[k] - x_mean(ki)) / x_scale(ki);
        mu_std += w_mu(ki) * z;
        ls += w_log_sigma(ki) * z;
    }
    return {y_mean + y_scale * mu_std, std::exp(ls) + sigma_floor};
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> HetPredictor::predict(const Eigen::MatrixXd& X) const {
    if (static_cast<std::size_t>(X.cols()) != input_dim()) {
        throw std::invalid_argument("HetPredictor::predict: dimension mismatch");
    }
    const Eigen::MatrixXd Z = standardize(*this, X);
    Eigen::VectorXd mu = (y_mean + y_scale * ((Z * w_mu).array() + b_mu)).matrix();
    Eigen::VectorXd sigma = (((Z * w_log_sigma).array() + b_log_sigma).exp() + sigma_floor).matrix();
    return {std::move(mu), std::move(sigma)};
}

double het_loss(const HetPredictor& m, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    return loss_and_grad(m, standardize(m, X), y, nullptr);
}

namespace {

std::vector<double> to_vec(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

Eigen::VectorXd from_vec(const std::vector<double>& v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

Json HetPredictor::to_json() const {
    Json j;
    j["x_mean"] = to_vec(x_mean);
    j["x_scale"] = to_vec(x_scale);
    j["y_mean"] = y_mean;
    j["y_scale"] = y_scale;
    j["w_mu"] = to_vec(w_mu);
    j["b_mu"] = b_mu;
    j["w_log_sigma"] = to_vec(w_log_sigma);
    j["b_log_sigma"] = b_log_sigma;
    j["lambda_sigma"] = lambda_sigma;
    j["sigma_floor"] = sigma_floor;
    return j;
}

HetPredictor HetPredictor::from_json(const Json& j) {
    HetPredictor m;
    m.x_mean = from_vec(j.at("x_mean").get<std::vector<double>>());
    m.x_scale = from_vec(j.at("x_scale").get<std::vector<double>>());
    m.y_mean = j.at("y_mean").get<double>();
    m.y_scale = j.at("y_scale").get<double>();
    m.w_mu = from_vec(j.at("w_mu").get<std::vector<double>>());
    m.b_mu = j.at("b_mu").get<double>();
    m.w_log_sigma = from_vec(j.at("w_log_sigma").get<std::vector<double>>());
    m.b_log_sigma = j.at("b_log_sigma").get<double>();
    m.lambda_sigma = j.at("lambda_sigma").get<double>();
    m.sigma_floor = j.at("sigma_floor").get<double>();
    const auto p = m.x_mean.size();
    if (m.x_scale.size() != p || m.w_mu.size() != p || m.w_log_sigma.size() != p) {
        throw std::invalid_argument("HetPredictor JSON: inconsistent dimensions");
    }
    return m;
}

HetFitResult fit_heteroscedastic(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const HetFitOptions& opt) {
    const auto n = X.rows();
    const auto p = X.cols();
    if (y.size() != n) {
        throw std::invalid_argument("fit_heteroscedastic: X and y row counts differ");
    }
    if (static_cast<std::size_t>(n) < std::max<std::size_t>(opt.min_samples, 2)) {
        throw std::invalid_argument("fit_heteroscedastic: too few samples (" + std::to_string(n) + ")");
    }
    if (!X.allFinite() || !y.allFinite()) {
        throw std::invalid_argument("fit_heteroscedastic: inputs must be finite");
    }
    if (opt.lambda_sigma < 0.0 || !(opt.step > 0.0) || !(opt.sigma_floor > 0.0)) {
        throw std::invalid_argument("fit_heteroscedastic: bad options");
    }

    HetFitResult res;
    HetPredictor& m = res.model;
    m.lambda_sigma = opt.lambda_sigma;
    m.sigma_floor = opt.sigma_floor;
    m.x_mean = X.colwise().mean().transpose();
    m.x_scale.resize(p);
    for (Eigen::Index k = 0; k < p; ++k) {
        const double sd = std::sqrt((X.col(k).array() - m.x_mean(k)).square().mean());
        m.x_scale(k) = sd > 1e-12 ? sd : 1.0;
    }
    m.y_mean = y.mean();
    const double ysd = std::sqrt((y.array() - m.y_mean).square().mean());
    m.y_scale = ysd > 1e-12 ? ysd : 1.0;

    const Eigen::MatrixXd Z = standardize(m, X);
    const Eigen::VectorXd yz = ((y.array() - m.y_mean) / m.y_scale).matrix();

    // Least-squares warm start for the mean; constant log-sigma from its residuals.
    Eigen::MatrixXd gram = Z.transpose() * Z;
    gram.diagonal().array() += 1e-8 * static_cast<double>(n);
    m.w_mu = gram.ldlt().solve(Z.transpose() * yz);
    m.b_mu = 0.0;
    const Eigen::VectorXd resid = y - (m.y_mean + m.y_scale * (Z * m.w_mu).array()).matrix();
    const double rsd = std::sqrt(resid.array().square().mean());
    m.w_log_sigma = Eigen::VectorXd::Zero(p);
    m.b_log_sigma = std::log(std::max(rsd, opt.sigma_floor));

    Params grad{Eigen::VectorXd(p), 0.0, Eigen::VectorXd(p), 0.0};
    double loss = loss_and_grad(m, Z, y, &grad);
    if (!std::isfinite(loss)) {
        throw std::runtime_error("fit_heteroscedastic: initial loss is not finite");
    }
    res.loss_trace.push_back(loss);
    double step = opt.step;
    for (std::size_t it = 1; it <= opt.iterations; ++it) {
        const Params cur = get_params(m);
        double trial_loss = std::numeric_limits<double>::infinity();
        for (int halvings = 0; halvings < 40; ++halvings) {
            set_params(m, {cur.w - step * grad.w, cur.b - step * grad.b, cur.v - step * grad.v, cur.c - step * grad.c});
            trial_loss = loss_and_grad(m, Z, y, nullptr);
            if (std::isfinite(trial_loss) && trial_loss <= loss) {
                break;
            }
            step *= 0.5;
        }
        if (!std::isfinite(trial_loss)) {
            throw std::runtime_error("fit_heteroscedastic: loss diverged at iteration " + std::to_string(it));
        }
        if (trial_loss > loss) {
            set_params(m, cur);  // no descent direction left at this precision
            trial_loss = loss;
        }
        loss = loss_and_grad(m, Z, y, &grad);
        step = std::min(opt.step, step * 2.0);
        if (it % opt.checkpoint_every == 0 || it == opt.iterations) {
            res.loss_trace.push_back(loss);
        }
    }
    return res;
}

}  // namespace tuq
