#include "divi/gradients.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace divi {

ObjectiveGradient objective_gradients(const Matrix& x, const ModelParams& params, const GateSample& gates,
                                      const PriorSpec& prior, double beta)
{
    const std::size_t n = x.rows();
    const std::size_t d = params.d();
    const std::size_t kk = params.k();
    if (prior.rho.size() != d)
        throw ModelError("prior length does not match feature dimension");

    Matrix resp = component_log_densities(x, params, gates.values);
    const auto log_pi = log_mixture_weights(params.alpha);

    // Turn log-densities into responsibilities in place, accumulating the NLL.
    std::vector<double> row(kk);
    double nll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < kk; ++k)
            row[k] = log_pi[k] + resp(i, k);
        const double lse = log_sum_exp(row);
        nll -= lse;
        for (std::size_t k = 0; k < kk; ++k)
            resp(i, k) = std::exp(row[k] - lse);
    }

    // Responsibility-weighted sufficient statistics.
    std::vector<double> mass(kk, 0.0);
    Matrix first(kk, d), second(kk, d);
    std::vector<double> bg_loglik(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto xi = x.row(i);
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = xi[j] - params.bg_mu[j];
            bg_loglik[j] += -0.5 * (kLog2Pi + params.bg_logvar[j] + diff * diff * std::exp(-params.bg_logvar[j]));
        }
        for (std::size_t k = 0; k < kk; ++k) {
            const double r = resp(i, k);
            mass[k] += r;
            const auto mk = params.mu.row(k);
            auto f = first.row(k);
            auto s = second.row(k);
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = xi[j] - mk[j];
                f[j] += r * diff;
                s[j] += r * diff * diff;
            }
        }
    }

    ObjectiveGradient out;
    GradientBundle& g = out.grad;
    g.d_alpha.resize(kk);
    g.d_mu = Matrix(kk, d);
    g.d_logvar = Matrix(kk, d);
    g.d_eta.assign(d, 0.0);

    const auto pi = mixture_weights(params.alpha);
    for (std::size_t k = 0; k < kk; ++k)
        g.d_alpha[k] = static_cast<double>(n) * pi[k] - mass[k];

    std::vector<double> d_gate(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
        d_gate[j] = bg_loglik[j];
    for (std::size_t k = 0; k < kk; ++k) {
        for (std::size_t j = 0; j < d; ++j) {
            const double lv = params.logvar(k, j);
            const double prec = std::exp(-lv);
            const double gj = gates.values[j];
            g.d_mu(k, j) = -gj * prec * first(k, j);
            g.d_logvar(k, j) = 0.5 * gj * (mass[k] - prec * second(k, j));
            d_gate[j] += 0.5 * (mass[k] * (kLog2Pi + lv) + prec * second(k, j));
        }
    }

    for (std::size_t j = 0; j < d; ++j) {
        double grad = 0.0;
        if (gates.reparameterized) {
            const double v = gates.values[j];
            grad += d_gate[j] * v * (1.0 - v) / gates.temperature;
        }
        const double q_raw = sigmoid(params.eta[j]);
        if (q_raw > kGateProbClamp && q_raw < 1.0 - kGateProbClamp) {
            const double r = std::clamp(prior.rho[j], kPriorClamp, 1.0 - kPriorClamp);
            grad += beta * q_raw * (1.0 - q_raw) * (params.eta[j] - logit(r));
        }
        g.d_eta[j] = grad;
    }

    out.value = nll + beta * gate_kl(params.eta, prior);
    return out;
}

double finite_difference_check(const Matrix& x, const ModelParams& params, const GateSample& gates,
                               const PriorSpec& prior, double beta)
{
    const auto analytic = objective_gradients(x, params, gates, prior, beta).grad;

    auto eval = [&](const ModelParams& p) {
        if (gates.reparameterized) {
            GateSample g = relaxed_gates_from_noise(p.eta, gates.noise, gates.temperature);
            return objective(x, p, g, prior, beta);
        }
        return objective(x, p, gates, prior, beta);
    };

    double worst = 0.0;
    ModelParams work = params;
    auto probe = [&](double& slot, double grad) {
        const double saved = slot;
        const double h = 1e-5 * (1.0 + std::abs(saved));
        slot = saved + h;
        const double up = eval(work);
        slot = saved - h;
        const double down = eval(work);
        slot = saved;
        const double fd = (up - down) / (2.0 * h);
        worst = std::max(worst, std::abs(grad - fd) / std::max(1.0, std::abs(fd)));
    };

    for (std::size_t k = 0; k < work.k(); ++k)
        probe(work.alpha[k], analytic.d_alpha[k]);
    for (std::size_t k = 0; k < work.k(); ++k) {
        for (std::size_t j = 0; j < work.d(); ++j) {
            probe(work.mu(k, j), analytic.d_mu(k, j));
            probe(work.logvar(k, j), analytic.d_logvar(k, j));
        }
    }
    for (std::size_t j = 0; j < work.d(); ++j)
        probe(work.eta[j], analytic.d_eta[j]);
    return worst;
}

} // namespace divi
