#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "divi/matrix.hpp"
#include "divi/rng.hpp"

namespace divi {

class ModelError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Default fixed background distribution on standardized data.
inline constexpr double kBackgroundMean = 0.0;
inline constexpr double kBackgroundLogVar = 2.0;

inline constexpr double kGateProbClamp = 1e-6;
inline constexpr double kPriorClamp = 0.01;

/// Feature-gated mixture parameters.
///
/// `alpha` holds unconstrained mixture logits, `mu` and `logvar` are K x D,
/// `eta` holds one variational gate logit per feature. The background
/// (`bg_mu`, `bg_logvar`) is fixed during training.
struct ModelParams {
    std::vector<double> alpha;
    Matrix mu;
    Matrix logvar;
    std::vector<double> eta;
    std::vector<double> bg_mu;
    std::vector<double> bg_logvar;

    std::size_t k() const noexcept { return alpha.size(); }
    std::size_t d() const noexcept { return eta.size(); }

    // Throws ModelError on inconsistent shapes or non-finite entries.
    void validate() const;

    bool operator==(const ModelParams&) const = default;
};

/// One relaxed draw of the feature gates. `noise` keeps the Gumbel values so
/// the same draw can be replayed for perturbed logits. When `reparameterized`
/// is false the values are treated as constants that do not depend on eta.
struct GateSample {
    std::vector<double> values;
    double temperature = 1.0;
    std::vector<double> noise;
    bool reparameterized = true;
};

enum class PriorMode { Informative, NonInformative, Random };

std::string to_string(PriorMode mode);
PriorMode prior_mode_from_string(const std::string& name);

struct PriorSpec {
    std::vector<double> rho;
    PriorMode mode = PriorMode::NonInformative;
};

double sigmoid(double x) noexcept;
double logit(double p) noexcept;

double gaussian_log_pdf(double x, double mu, double logvar);

std::vector<double> mixture_weights(std::span<const double> alpha);
std::vector<double> log_mixture_weights(std::span<const double> alpha);

double gated_component_log_density(std::span<const double> x, std::size_t k, const ModelParams& params,
                                   std::span<const double> gates);

double marginal_log_likelihood(std::span<const double> x, const ModelParams& params,
                               std::span<const double> gates);

// Stable log(sum(exp(v))).
double log_sum_exp(std::span<const double> v) noexcept;

// Closed-form KL between Bernoulli(sigmoid(eta)) and Bernoulli(rho), summed
// over features. q is clamped to [1e-6, 1 - 1e-6].
double gate_kl(std::span<const double> eta, const PriorSpec& prior);

GateSample sample_relaxed_gates(std::span<const double> eta, double temperature, Rng& rng);

// Rebuilds the gate values sigmoid((eta + noise) / T) for a fixed noise draw.
GateSample relaxed_gates_from_noise(std::span<const double> eta, std::span<const double> noise,
                                    double temperature);

// Deterministic gate probabilities sigmoid(eta).
std::vector<double> gate_probabilities(std::span<const double> eta);

/// N x K matrix of gated component log-densities for every row of `x`.
Matrix component_log_densities(const Matrix& x, const ModelParams& params, std::span<const double> gates);

/// Scaled variational objective: negative log-likelihood of all rows under a
/// single shared gate sample plus beta times the gate KL.
double objective(const Matrix& x, const ModelParams& params, const GateSample& gates, const PriorSpec& prior,
                 double beta);

// Clamps rho into [kPriorClamp, 1 - kPriorClamp] in place.
void clamp_prior(PriorSpec& prior);

} // namespace divi
