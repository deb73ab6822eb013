#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "divi/datagen.hpp"
#include "divi/gradients.hpp"
#include "divi/model.hpp"
#include "divi/rng.hpp"

namespace divi {

struct TrainConfig {
    std::size_t epochs = 300;
    std::size_t t_split = 120;
    double tau_mult = 1.0;
    double beta_mult = 1.0; // beta = beta_mult * N
    double lr = 0.01;
    double t0 = 1.0;
    double t_min = 0.1;
    double gamma = 0.99;
    double sigma_split = 0.2;
    std::size_t k_max = 64;
    double logvar_floor = -10.0;
    double bg_logvar = kBackgroundLogVar;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
};

struct SplitEvent {
    std::size_t epoch = 0;
    std::size_t component = 0;
    double score = 0.0;
};

struct EpochTrace {
    double objective = 0.0;
    std::size_t k = 0;
    double temperature = 0.0;
};

struct FitResult {
    ModelParams params;
    Labels labels;
    std::vector<double> gate_probs;
    std::size_t final_k = 0;
    std::vector<SplitEvent> split_events;
    std::vector<EpochTrace> trace;
};

// Raised when the objective stops being finite; carries the trace so far.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, std::vector<EpochTrace> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}
    const std::vector<EpochTrace>& trace() const noexcept { return trace_; }

private:
    std::vector<EpochTrace> trace_;
};

/// Adam moments for every trainable array. A split changes the parameter
/// shapes, after which the state is rebuilt from zero.
class AdamState {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEpsilon = 1e-8;

    AdamState() = default;
    explicit AdamState(const ModelParams& shape);

    void reset(const ModelParams& shape);
    std::size_t steps() const noexcept { return step_; }

    // One bias-corrected update followed by the log-variance floor projection.
    void step(ModelParams& params, const GradientBundle& grads, double lr, double logvar_floor);

private:
    std::size_t step_ = 0;
    std::vector<double> m_alpha_, v_alpha_;
    std::vector<double> m_mu_, v_mu_;
    std::vector<double> m_logvar_, v_logvar_;
    std::vector<double> m_eta_, v_eta_;
};

void adam_step(AdamState& state, ModelParams& params, const GradientBundle& grads, double lr, double logvar_floor);

// Entropy of a d-dimensional isotropic Gaussian with variance sigma2.
double default_split_threshold(std::size_t d, double sigma2 = 1.0);

double anneal_temperature(double t, double gamma, double t_min);

// argmax_k of the gated component log-density under sigmoid(eta) gates; ties
// go to the lowest index.
Labels hard_assignments(const Matrix& x, const ModelParams& params);

// Average negative gated log-density of each cluster's members. Empty
// clusters are std::nullopt.
std::vector<std::optional<double>> cluster_diagnostics(const Matrix& x, const ModelParams& params,
                                                       const Labels& labels);

// Index of the worst present cluster (lowest index on ties), if any.
std::optional<std::size_t> worst_cluster(const std::vector<std::optional<double>>& scores);

// Replaces component k_star by two children with means mu +/- independent
// N(0, sigma_split^2 I) draws and logits alpha - log 2. Returns the input
// unchanged (with a warning on stderr) if K is already k_max.
ModelParams split_component(const ModelParams& params, std::size_t k_star, double sigma_split, Rng& rng,
                            std::size_t k_max = 64);

// K = 1 model at the column means with unit variances and eta = logit(rho).
ModelParams initial_params(const Matrix& x, const PriorSpec& prior, double bg_logvar = kBackgroundLogVar);

FitResult fit(const Matrix& x, const PriorSpec& prior, const TrainConfig& config);

} // namespace divi
