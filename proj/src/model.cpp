#include "divi/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace divi {

namespace {

void require_finite(double v)
{
    if (!std::isfinite(v))
        throw ModelError("non-finite input");
}

void check_gates(std::span<const double> gates, std::size_t d)
{
    if (gates.size() != d)
        throw ModelError("gate vector length does not match feature dimension");
}

} // namespace

std::string to_string(PriorMode mode)
{
    switch (mode) {
    case PriorMode::Informative:
        return "informative";
    case PriorMode::NonInformative:
        return "noninformative";
    case PriorMode::Random:
        return "random";
    }
    return "unknown";
}

PriorMode prior_mode_from_string(const std::string& name)
{
    if (name == "informative" || name == "info")
        return PriorMode::Informative;
    if (name == "noninformative" || name == "noninfo")
        return PriorMode::NonInformative;
    if (name == "random")
        return PriorMode::Random;
    throw ModelError("unknown prior mode: " + name);
}

void ModelParams::validate() const
{
    const std::size_t kk = k();
    const std::size_t dd = d();
    if (kk == 0)
        throw ModelError("model must have at least one component");
    if (mu.rows() != kk || mu.cols() != dd || logvar.rows() != kk || logvar.cols() != dd)
        throw ModelError("mean/log-variance shape does not match (K, D)");
    if (bg_mu.size() != dd || bg_logvar.size() != dd)
        throw ModelError("background shape does not match D");
    auto all_finite = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
    };
    if (!all_finite(alpha) || !all_finite(mu.values()) || !all_finite(logvar.values()) || !all_finite(eta) ||
        !all_finite(bg_mu) || !all_finite(bg_logvar))
        throw ModelError("model parameters contain non-finite values");
}

double sigmoid(double x) noexcept
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) noexcept { return std::log(p) - std::log1p(-p); }

double gaussian_log_pdf(double x, double mu, double logvar)
{
    require_finite(x);
    require_finite(mu);
    require_finite(logvar);
    const double diff = x - mu;
    return -0.5 * (kLog2Pi + logvar + diff * diff * std::exp(-logvar));
}

std::vector<double> mixture_weights(std::span<const double> alpha)
{
    if (alpha.empty())
        throw ModelError("mixture_weights: empty logit vector");
    const double m = *std::max_element(alpha.begin(), alpha.end());
    std::vector<double> w(alpha.size());
    double total = 0.0;
    for (std::size_t k = 0; k < alpha.size(); ++k) {
        w[k] = std::exp(alpha[k] - m);
        total += w[k];
    }
    for (double& v : w)
        v /= total;
    return w;
}

std::vector<double> log_mixture_weights(std::span<const double> alpha)
{
    if (alpha.empty())
        throw ModelError("mixture_weights: empty logit vector");
    const double lse = log_sum_exp(alpha);
    std::vector<double> out(alpha.size());
    for (std::size_t k = 0; k < alpha.size(); ++k)
        out[k] = alpha[k] - lse;
    return out;
}

double log_sum_exp(std::span<const double> v) noexcept
{
    if (v.empty())
        return -std::numeric_limits<double>::infinity();
    const double m = *std::max_element(v.begin(), v.end());
    if (!std::isfinite(m))
        return m;
    double s = 0.0;
    for (double x : v)
        s += std::exp(x - m);
    return m + std::log(s);
}

double gated_component_log_density(std::span<const double> x, std::size_t k, const ModelParams& params,
                                   std::span<const double> gates)
{
    const std::size_t d = params.d();
    if (x.size() != d)
        throw ModelError("sample length does not match feature dimension");
    check_gates(gates, d);
    if (k >= params.k())
        throw ModelError("component index out of range");
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        const double g = gates[j];
        const double comp = gaussian_log_pdf(x[j], params.mu(k, j), params.logvar(k, j));
        const double bg = gaussian_log_pdf(x[j], params.bg_mu[j], params.bg_logvar[j]);
        total += g * comp + (1.0 - g) * bg;
    }
    return total;
}

double marginal_log_likelihood(std::span<const double> x, const ModelParams& params,
                               std::span<const double> gates)
{
    const auto log_pi = log_mixture_weights(params.alpha);
    std::vector<double> terms(params.k());
    for (std::size_t k = 0; k < params.k(); ++k)
        terms[k] = log_pi[k] + gated_component_log_density(x, k, params, gates);
    return log_sum_exp(terms);
}

double gate_kl(std::span<const double> eta, const PriorSpec& prior)
{
    if (eta.size() != prior.rho.size())
        throw ModelError("gate_kl: eta and rho lengths differ");
    double total = 0.0;
    for (std::size_t j = 0; j < eta.size(); ++j) {
        const double q = std::clamp(sigmoid(eta[j]), kGateProbClamp, 1.0 - kGateProbClamp);
        const double r = std::clamp(prior.rho[j], kPriorClamp, 1.0 - kPriorClamp);
        total += q * std::log(q / r) + (1.0 - q) * std::log((1.0 - q) / (1.0 - r));
    }
    return total;
}

GateSample relaxed_gates_from_noise(std::span<const double> eta, std::span<const double> noise,
                                    double temperature)
{
    if (!(temperature > 0.0))
        throw ModelError("temperature must be positive");
    if (eta.size() != noise.size())
        throw ModelError("noise length does not match eta");
    GateSample s;
    s.temperature = temperature;
    s.noise.assign(noise.begin(), noise.end());
    s.values.resize(eta.size());
    for (std::size_t j = 0; j < eta.size(); ++j) {
        // Keep the value strictly inside (0, 1) even when the sigmoid saturates.
        const double v = sigmoid((eta[j] + noise[j]) / temperature);
        s.values[j] = std::clamp(v, std::numeric_limits<double>::min(), std::nextafter(1.0, 0.0));
    }
    return s;
}

GateSample sample_relaxed_gates(std::span<const double> eta, double temperature, Rng& rng)
{
    if (!(temperature > 0.0))
        throw ModelError("temperature must be positive");
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<double> noise(eta.size());
    for (double& g : noise) {
        const double u = std::clamp(unif(rng), 1e-10, 1.0 - 1e-10);
        g = -std::log(-std::log(u));
    }
    return relaxed_gates_from_noise(eta, noise, temperature);
}

std::vector<double> gate_probabilities(std::span<const double> eta)
{
    std::vector<double> q(eta.size());
    std::transform(eta.begin(), eta.end(), q.begin(), sigmoid);
    return q;
}

Matrix component_log_densities(const Matrix& x, const ModelParams& params, std::span<const double> gates)
{
    const std::size_t n = x.rows();
    const std::size_t d = params.d();
    const std::size_t kk = params.k();
    if (x.cols() != d)
        throw ModelError("data dimension does not match model");
    check_gates(gates, d);

    // Per-component constants: gate-weighted precisions and normalizers.
    Matrix weight(kk, d);
    std::vector<double> offset(kk, 0.0);
    for (std::size_t k = 0; k < kk; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            const double lv = params.logvar(k, j);
            weight(k, j) = gates[j] * std::exp(-lv);
            offset[k] += gates[j] * (kLog2Pi + lv);
        }
    }
    std::vector<double> bg_prec(d);
    double bg_offset = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
        bg_prec[j] = (1.0 - gates[j]) * std::exp(-params.bg_logvar[j]);
        bg_offset += (1.0 - gates[j]) * (kLog2Pi + params.bg_logvar[j]);
    }

    Matrix out(n, kk);
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = x.row(i);
        double bg = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = xi[j] - params.bg_mu[j];
            bg += bg_prec[j] * diff * diff;
        }
        const double bg_term = -0.5 * (bg_offset + bg);
        for (std::size_t k = 0; k < kk; ++k) {
            const auto mk = params.mu.row(k);
            const auto wk = weight.row(k);
            double quad = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = xi[j] - mk[j];
                quad += wk[j] * diff * diff;
            }
            out(i, k) = bg_term - 0.5 * (offset[k] + quad);
        }
    }
    return out;
}

double objective(const Matrix& x, const ModelParams& params, const GateSample& gates, const PriorSpec& prior,
                 double beta)
{
    const Matrix ell = component_log_densities(x, params, gates.values);
    const auto log_pi = log_mixture_weights(params.alpha);

    std::vector<double> terms(params.k());
    double nll = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t k = 0; k < params.k(); ++k)
            terms[k] = log_pi[k] + ell(i, k);
        nll -= log_sum_exp(terms);
    }
    return nll + beta * gate_kl(params.eta, prior);
}

void clamp_prior(PriorSpec& prior)
{
    for (double& r : prior.rho)
        r = std::clamp(r, kPriorClamp, 1.0 - kPriorClamp);
}

} // namespace divi
