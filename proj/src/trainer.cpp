#include "divi/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numbers>

namespace divi {

void TrainConfig::validate() const
{
    if (epochs < 1)
        throw std::invalid_argument("epochs must be >= 1");
    if (t_split < 1 || t_split > epochs)
        throw std::invalid_argument("t_split must lie in [1, epochs]");
    if (!(t_min > 0.0) || !(t0 >= t_min))
        throw std::invalid_argument("temperatures must satisfy t0 >= t_min > 0");
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw std::invalid_argument("gamma must lie in (0, 1]");
    if (!(lr > 0.0))
        throw std::invalid_argument("learning rate must be positive");
    if (!(beta_mult >= 0.0))
        throw std::invalid_argument("beta_mult must be non-negative");
    if (!(tau_mult >= 0.0))
        throw std::invalid_argument("tau_mult must be non-negative");
    if (!(sigma_split >= 0.0))
        throw std::invalid_argument("sigma_split must be non-negative");
    if (k_max < 1)
        throw std::invalid_argument("k_max must be >= 1");
    if (!std::isfinite(logvar_floor) || !std::isfinite(bg_logvar))
        throw std::invalid_argument("log-variance settings must be finite");
}

AdamState::AdamState(const ModelParams& shape) { reset(shape); }

void AdamState::reset(const ModelParams& shape)
{
    step_ = 0;
    const std::size_t kd = shape.k() * shape.d();
    m_alpha_.assign(shape.k(), 0.0);
    v_alpha_.assign(shape.k(), 0.0);
    m_mu_.assign(kd, 0.0);
    v_mu_.assign(kd, 0.0);
    m_logvar_.assign(kd, 0.0);
    v_logvar_.assign(kd, 0.0);
    m_eta_.assign(shape.d(), 0.0);
    v_eta_.assign(shape.d(), 0.0);
}

namespace {

void adam_update(std::vector<double>& theta, const std::vector<double>& grad, std::vector<double>& m,
                 std::vector<double>& v, double lr, double bc1, double bc2)
{
    if (theta.size() != grad.size() || m.size() != theta.size())
        throw std::invalid_argument("adam: gradient shape does not match parameters");
    for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        m[i] = AdamState::kBeta1 * m[i] + (1.0 - AdamState::kBeta1) * g;
        v[i] = AdamState::kBeta2 * v[i] + (1.0 - AdamState::kBeta2) * g * g;
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        theta[i] -= lr * m_hat / (std::sqrt(v_hat) + AdamState::kEpsilon);
    }
}

} // namespace

void AdamState::step(ModelParams& params, const GradientBundle& grads, double lr, double logvar_floor)
{
    ++step_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step_));
    adam_update(params.alpha, grads.d_alpha, m_alpha_, v_alpha_, lr, bc1, bc2);
    adam_update(params.mu.values(), grads.d_mu.values(), m_mu_, v_mu_, lr, bc1, bc2);
    adam_update(params.logvar.values(), grads.d_logvar.values(), m_logvar_, v_logvar_, lr, bc1, bc2);
    adam_update(params.eta, grads.d_eta, m_eta_, v_eta_, lr, bc1, bc2);
    for (double& lv : params.logvar.values())
        lv = std::max(lv, logvar_floor);
}

void adam_step(AdamState& state, ModelParams& params, const GradientBundle& grads, double lr, double logvar_floor)
{
    state.step(params, grads, lr, logvar_floor);
}

double default_split_threshold(std::size_t d, double sigma2)
{
    return 0.5 * static_cast<double>(d) * (1.0 + kLog2Pi + std::log(sigma2));
}

double anneal_temperature(double t, double gamma, double t_min) { return std::max(t_min, gamma * t); }

Labels hard_assignments(const Matrix& x, const ModelParams& params)
{
    const auto gates = gate_probabilities(params.eta);
    const Matrix ell = component_log_densities(x, params, gates);
    Labels labels(x.rows(), 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < params.k(); ++k)
            if (ell(i, k) > ell(i, best))
                best = k;
        labels[i] = static_cast<int>(best);
    }
    return labels;
}

std::vector<std::optional<double>> cluster_diagnostics(const Matrix& x, const ModelParams& params,
                                                       const Labels& labels)
{
    if (labels.size() != x.rows())
        throw std::invalid_argument("label count does not match rows");
    const auto gates = gate_probabilities(params.eta);
    const Matrix ell = component_log_densities(x, params, gates);
    std::vector<double> sum(params.k(), 0.0);
    std::vector<std::size_t> count(params.k(), 0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= params.k())
            throw std::invalid_argument("label out of range for model");
        const auto k = static_cast<std::size_t>(labels[i]);
        sum[k] -= ell(i, k);
        ++count[k];
    }
    std::vector<std::optional<double>> scores(params.k());
    for (std::size_t k = 0; k < params.k(); ++k)
        if (count[k] > 0)
            scores[k] = sum[k] / static_cast<double>(count[k]);
    return scores;
}

std::optional<std::size_t> worst_cluster(const std::vector<std::optional<double>>& scores)
{
    std::optional<std::size_t> best;
    for (std::size_t k = 0; k < scores.size(); ++k)
        if (scores[k] && (!best || *scores[k] > *scores[*best]))
            best = k;
    return best;
}

ModelParams split_component(const ModelParams& params, std::size_t k_star, double sigma_split, Rng& rng,
                            std::size_t k_max)
{
    if (k_star >= params.k())
        throw std::invalid_argument("split index out of range");
    if (params.k() >= k_max) {
        std::clog << "warning: split of component " << k_star << " skipped, K already at k_max = " << k_max
                  << '\n';
        return params;
    }
    const std::size_t d = params.d();
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> delta_a(d), delta_b(d);
    for (double& v : delta_a)
        v = sigma_split * normal(rng);
    for (double& v : delta_b)
        v = sigma_split * normal(rng);

    ModelParams out = params;
    const double child_logit = params.alpha[k_star] - std::numbers::ln2;
    out.alpha[k_star] = child_logit;
    out.alpha.push_back(child_logit);

    std::vector<double> mean_b(d);
    for (std::size_t j = 0; j < d; ++j) {
        out.mu(k_star, j) = params.mu(k_star, j) + delta_a[j];
        mean_b[j] = params.mu(k_star, j) - delta_b[j];
    }
    out.mu.append_row(mean_b);
    out.logvar.append_row(params.logvar.row(k_star));
    return out;
}

ModelParams initial_params(const Matrix& x, const PriorSpec& prior, double bg_logvar)
{
    const std::size_t d = x.cols();
    if (prior.rho.size() != d)
        throw std::invalid_argument("prior length does not match data dimension");
    ModelParams p;
    p.alpha = {0.0};
    p.mu = Matrix(1, d);
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < d; ++j)
            p.mu(0, j) += x(i, j);
    for (double& v : p.mu.values())
        v /= static_cast<double>(x.rows());
    p.logvar = Matrix(1, d, 0.0);
    p.eta.resize(d);
    for (std::size_t j = 0; j < d; ++j)
        p.eta[j] = logit(std::clamp(prior.rho[j], kPriorClamp, 1.0 - kPriorClamp));
    p.bg_mu.assign(d, kBackgroundMean);
    p.bg_logvar.assign(d, bg_logvar);
    return p;
}

FitResult fit(const Matrix& x, const PriorSpec& prior, const TrainConfig& config)
{
    config.validate();
    if (x.rows() < 2)
        throw std::invalid_argument("fit requires at least two samples");

    Rng noise_rng = make_rng(config.seed, "train.noise");
    Rng split_rng = make_rng(config.seed, "train.split");

    FitResult result;
    ModelParams params = initial_params(x, prior, config.bg_logvar);
    AdamState adam(params);
    const double beta = config.beta_mult * static_cast<double>(x.rows());
    const double tau = config.tau_mult * default_split_threshold(x.cols(), 1.0);
    double temperature = config.t0;
    result.trace.reserve(config.epochs);

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const GateSample gates = sample_relaxed_gates(params.eta, temperature, noise_rng);
        const ObjectiveGradient og = objective_gradients(x, params, gates, prior, beta);
        result.trace.push_back({og.value, params.k(), temperature});
        if (!std::isfinite(og.value))
            throw TrainingError("non-finite objective at epoch " + std::to_string(epoch), result.trace);

        adam.step(params, og.grad, config.lr, config.logvar_floor);
        temperature = anneal_temperature(temperature, config.gamma, config.t_min);

        if (epoch % config.t_split != 0)
            continue;
        const Labels labels = hard_assignments(x, params);
        const auto scores = cluster_diagnostics(x, params, labels);
        const auto worst = worst_cluster(scores);
        if (!worst || !(*scores[*worst] > tau))
            continue;
        if (params.k() >= config.k_max) {
            std::clog << "warning: split at epoch " << epoch << " skipped, K already at k_max\n";
            continue;
        }
        params = split_component(params, *worst, config.sigma_split, split_rng, config.k_max);
        adam.reset(params);
        result.split_events.push_back({epoch, *worst, *scores[*worst]});
    }

    result.labels = hard_assignments(x, params);
    result.gate_probs = gate_probabilities(params.eta);
    result.final_k = params.k();
    result.params = std::move(params);
    return result;
}

} // namespace divi
