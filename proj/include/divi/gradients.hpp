#pragma once

#include <vector>

#include "divi/matrix.hpp"
#include "divi/model.hpp"

namespace divi {

struct GradientBundle {
    std::vector<double> d_alpha;
    Matrix d_mu;
    Matrix d_logvar;
    std::vector<double> d_eta;
};

struct ObjectiveGradient {
    double value = 0.0;
    GradientBundle grad;
};

/// Objective value and its exact gradient with respect to (alpha, mu, logvar,
/// eta) for a frozen gate draw.
///
/// The eta gradient has two parts: the pathwise term through the relaxed gates,
/// using d gate_j / d eta_j = gate_j (1 - gate_j) / T, and beta times the KL
/// derivative. The pathwise term is dropped when `gates.reparameterized` is
/// false. Gradients are taken on the unconstrained log-variances; any floor is
/// applied by the optimizer afterwards.
ObjectiveGradient objective_gradients(const Matrix& x, const ModelParams& params, const GateSample& gates,
                                      const PriorSpec& prior, double beta);

// Maximum over all trainable scalars of |analytic - central difference| /
// max(1, |central difference|), with step 1e-5 * (1 + |theta|). The Gumbel
// noise in `gates` is held fixed while eta is perturbed.
double finite_difference_check(const Matrix& x, const ModelParams& params, const GateSample& gates,
                               const PriorSpec& prior, double beta);

} // namespace divi
