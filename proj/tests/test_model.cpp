#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "divi/model.hpp"
#include "test_util.hpp"

using namespace divi;
using divi::testing::random_matrix;
using divi::testing::random_params;
using divi::testing::random_prior;

namespace {

std::vector<double> all(std::size_t d, double v) { return std::vector<double>(d, v); }

// Objective recomputed term by term in long double.
long double naive_objective(const Matrix& x, const ModelParams& p, const std::vector<double>& g,
                            const PriorSpec& prior, double beta)
{
    const long double log2pi = std::log(2.0L * 3.14159265358979323846264338327950288L);
    auto logn = [&](long double v, long double m, long double lv) {
        return -0.5L * (log2pi + lv + (v - m) * (v - m) * std::exp(-lv));
    };
    long double asum = 0.0L;
    for (double a : p.alpha)
        asum += std::exp(static_cast<long double>(a));
    long double nll = 0.0L;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        long double lik = 0.0L;
        for (std::size_t k = 0; k < p.k(); ++k) {
            long double l = 0.0L;
            for (std::size_t j = 0; j < x.cols(); ++j)
                l += g[j] * logn(x(i, j), p.mu(k, j), p.logvar(k, j)) +
                     (1.0L - g[j]) * logn(x(i, j), p.bg_mu[j], p.bg_logvar[j]);
            lik += std::exp(static_cast<long double>(p.alpha[k])) / asum * std::exp(l);
        }
        nll -= std::log(lik);
    }
    long double kl = 0.0L;
    for (std::size_t j = 0; j < p.d(); ++j) {
        long double q = 1.0L / (1.0L + std::exp(-static_cast<long double>(p.eta[j])));
        long double r = prior.rho[j];
        kl += q * std::log(q / r) + (1.0L - q) * std::log((1.0L - q) / (1.0L - r));
    }
    return nll + beta * kl;
}

} // namespace

TEST(GaussianLogPdf, KnownValues)
{
    EXPECT_NEAR(gaussian_log_pdf(0, 0, 0), -0.9189385, 1e-7);
    EXPECT_NEAR(gaussian_log_pdf(1, 0, 0), -1.4189385, 1e-7);
    for (double v : {-3.0, 0.0, 1.5})
        EXPECT_DOUBLE_EQ(gaussian_log_pdf(0.7, 0.7, v), -0.5 * (kLog2Pi + v));
}

TEST(GaussianLogPdf, RejectsNonFinite)
{
    EXPECT_THROW(gaussian_log_pdf(NAN, 0, 0), ModelError);
    EXPECT_THROW(gaussian_log_pdf(0, INFINITY, 0), ModelError);
    EXPECT_THROW(gaussian_log_pdf(0, 0, NAN), ModelError);
}

TEST(MixtureWeights, Examples)
{
    auto w = mixture_weights(std::vector<double>{0, 0, 0});
    for (double v : w)
        EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    w = mixture_weights(std::vector<double>{std::log(2.0), 0});
    EXPECT_NEAR(w[0], 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(w[1], 1.0 / 3.0, 1e-15);
    EXPECT_THROW(mixture_weights(std::vector<double>{}), ModelError);
}

TEST(MixtureWeights, SimplexAndShiftInvariance)
{
    Rng rng(11);
    std::uniform_real_distribution<double> shift(-50, 50);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t k = 1 + trial % 7;
        auto alpha = divi::testing::random_vector(k, rng, 5.0);
        auto w = mixture_weights(alpha);
        EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
        for (double v : w)
            EXPECT_GT(v, 0.0);
        const double c = shift(rng);
        auto shifted = alpha;
        for (auto& a : shifted)
            a += c;
        auto w2 = mixture_weights(shifted);
        for (std::size_t i = 0; i < k; ++i)
            EXPECT_NEAR(w[i], w2[i], 1e-12);
    }
}

TEST(GatedDensity, Reductions)
{
    Rng rng(3);
    auto p = random_params(2, 5, rng);
    auto x = divi::testing::random_vector(5, rng);
    double open = 0, closed = 0;
    for (std::size_t j = 0; j < 5; ++j) {
        open += gaussian_log_pdf(x[j], p.mu(1, j), p.logvar(1, j));
        closed += gaussian_log_pdf(x[j], p.bg_mu[j], p.bg_logvar[j]);
    }
    EXPECT_NEAR(gated_component_log_density(x, 1, p, all(5, 1.0)), open, 1e-12);
    EXPECT_NEAR(gated_component_log_density(x, 1, p, all(5, 0.0)), closed, 1e-12);
}

TEST(GatedDensity, SingleDimensionHalfGate)
{
    ModelParams p{{0.0}, Matrix(1, 1, 0.0), Matrix(1, 1, 0.0), {0.0}, {0.0}, {2.0}};
    std::vector<double> x{0.0};
    EXPECT_NEAR(gated_component_log_density(x, 0, p, std::vector<double>{0.5}), -1.4189385, 1e-7);
}

TEST(GatedDensity, DimensionMismatchThrows)
{
    Rng rng(1);
    auto p = random_params(1, 3, rng);
    std::vector<double> x{0, 0};
    EXPECT_THROW(gated_component_log_density(x, 0, p, all(3, 1)), ModelError);
    std::vector<double> x3{0, 0, 0};
    EXPECT_THROW(gated_component_log_density(x3, 0, p, all(2, 1)), ModelError);
}

TEST(GatedDensity, LinearInEachGate)
{
    Rng rng(5);
    std::uniform_real_distribution<double> unif(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = random_params(2, 4, rng);
        auto x = divi::testing::random_vector(4, rng);
        std::vector<double> g(4);
        for (auto& v : g)
            v = unif(rng);
        const std::size_t j = trial % 4;
        const double t = unif(rng);
        auto g0 = g, g1 = g, gt = g;
        g0[j] = 0;
        g1[j] = 1;
        gt[j] = t;
        const double v0 = gated_component_log_density(x, 0, p, g0);
        const double v1 = gated_component_log_density(x, 0, p, g1);
        EXPECT_NEAR(gated_component_log_density(x, 0, p, gt), (1 - t) * v0 + t * v1, 1e-10);
    }
}

TEST(MarginalLikelihood, SingleAndDuplicatedComponents)
{
    Rng rng(8);
    auto p = random_params(1, 4, rng);
    auto x = divi::testing::random_vector(4, rng);
    auto g = all(4, 0.6);
    const double l = gated_component_log_density(x, 0, p, g);
    EXPECT_NEAR(marginal_log_likelihood(x, p, g), l, 1e-12);

    ModelParams twin = p;
    twin.alpha = {0.0, 0.0};
    twin.mu.append_row(p.mu.row(0));
    twin.logvar.append_row(p.logvar.row(0));
    EXPECT_NEAR(marginal_log_likelihood(x, twin, g), l, 1e-12);
}

TEST(MarginalLikelihood, BoundedByBestComponent)
{
    Rng rng(9);
    for (int trial = 0; trial < 100; ++trial) {
        auto p = random_params(3, 4, rng);
        auto x = divi::testing::random_vector(4, rng, 2.0);
        auto g = all(4, 0.3);
        double best = -INFINITY;
        for (std::size_t k = 0; k < 3; ++k)
            best = std::max(best, gated_component_log_density(x, k, p, g));
        EXPECT_LE(marginal_log_likelihood(x, p, g), best + 1e-12);
    }
}

TEST(MarginalLikelihood, ComponentPermutationInvariance)
{
    Rng rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        auto p = random_params(3, 5, rng);
        auto x = divi::testing::random_vector(5, rng);
        auto g = all(5, 0.7);
        std::vector<std::size_t> perm{2, 0, 1};
        ModelParams q = p;
        for (std::size_t k = 0; k < 3; ++k) {
            q.alpha[k] = p.alpha[perm[k]];
            std::copy(p.mu.row(perm[k]).begin(), p.mu.row(perm[k]).end(), q.mu.row(k).begin());
            std::copy(p.logvar.row(perm[k]).begin(), p.logvar.row(perm[k]).end(), q.logvar.row(k).begin());
        }
        EXPECT_NEAR(marginal_log_likelihood(x, p, g), marginal_log_likelihood(x, q, g), 1e-12);
    }
}

TEST(LogSumExp, OffsetsShiftExactly)
{
    Rng rng(12);
    for (double offset : {1e4, -1e4, 1e6, -1e6}) {
        auto v = divi::testing::random_vector(5, rng, 3.0);
        auto shifted = v;
        for (auto& s : shifted)
            s += offset;
        EXPECT_NEAR(log_sum_exp(shifted), log_sum_exp(v) + offset, 1e-9 * std::abs(offset));
        EXPECT_TRUE(std::isfinite(log_sum_exp(shifted)));
    }
}

TEST(MarginalLikelihood, LargeMagnitudeDensitiesStayFinite)
{
    ModelParams p{{0.0, 0.0}, Matrix(2, 1, 0.0), Matrix(2, 1, -10.0), {0.0}, {0.0}, {2.0}};
    p.mu(1, 0) = 30.0;
    std::vector<double> x{-30.0};
    const double v = marginal_log_likelihood(x, p, std::vector<double>{1.0});
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_LT(v, -1e6);
}

TEST(GateKl, KnownValues)
{
    PriorSpec prior{{0.5}, PriorMode::NonInformative};
    EXPECT_NEAR(gate_kl(std::vector<double>{logit(0.9)}, prior), 0.3680642, 1e-7);
    prior.rho = {0.99};
    EXPECT_NEAR(gate_kl(std::vector<double>{0.0}, prior), 1.6144631, 1e-7);
}

TEST(GateKl, NonNegativeAndZeroOnlyAtPrior)
{
    Rng rng(13);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t d = 1 + trial % 6;
        auto prior = random_prior(d, rng);
        auto eta = divi::testing::random_vector(d, rng, 4.0);
        const double kl = gate_kl(eta, prior);
        EXPECT_GE(kl, 0.0);
        std::vector<double> at_prior;
        for (double r : prior.rho)
            at_prior.push_back(logit(r));
        EXPECT_NEAR(gate_kl(at_prior, prior), 0.0, 1e-12);
        bool differs = false;
        for (std::size_t j = 0; j < d; ++j)
            differs |= std::abs(sigmoid(eta[j]) - prior.rho[j]) > 1e-3;
        if (differs)
            EXPECT_GT(kl, 0.0);
    }
}

TEST(GateKl, SaturatedLogitsStayFinite)
{
    PriorSpec prior{{0.01, 0.99}, PriorMode::Random};
    const double kl = gate_kl(std::vector<double>{1e4, -1e4}, prior);
    EXPECT_TRUE(std::isfinite(kl));
    EXPECT_GT(kl, 0.0);
}

TEST(RelaxedGates, KnownDraw)
{
    const double g = -std::log(-std::log(0.5));
    EXPECT_NEAR(g, 0.3665129, 1e-7);
    auto s = relaxed_gates_from_noise(std::vector<double>{0.0}, std::vector<double>{g}, 1.0);
    EXPECT_NEAR(s.values[0], 0.5906161, 1e-7);
    EXPECT_EQ(s.noise[0], g);
}

TEST(RelaxedGates, LowTemperatureLimit)
{
    auto s = relaxed_gates_from_noise(std::vector<double>{0.5}, std::vector<double>{0.0}, 1e-3);
    EXPECT_GT(s.values[0], 1.0 - 1e-12);
    EXPECT_LT(s.values[0], 1.0);
}

TEST(RelaxedGates, ValuesInsideOpenInterval)
{
    Rng rng(14);
    std::vector<double> eta{-40, -5, 0, 5, 40};
    for (double t : {1.0, 0.1, 1e-3}) {
        for (int trial = 0; trial < 200; ++trial) {
            auto s = sample_relaxed_gates(eta, t, rng);
            ASSERT_EQ(s.values.size(), eta.size());
            ASSERT_EQ(s.noise.size(), eta.size());
            for (double v : s.values) {
                EXPECT_GT(v, 0.0);
                EXPECT_LT(v, 1.0);
            }
        }
    }
}

TEST(RelaxedGates, RejectsNonPositiveTemperature)
{
    Rng rng(1);
    EXPECT_THROW(sample_relaxed_gates(std::vector<double>{0.0}, 0.0, rng), ModelError);
    EXPECT_THROW(sample_relaxed_gates(std::vector<double>{0.0}, -1.0, rng), ModelError);
}

TEST(RelaxedGates, NoiseIsStandardGumbel)
{
    Rng rng(15);
    std::vector<double> eta(1000, 0.0);
    double sum = 0;
    for (int r = 0; r < 20; ++r)
        for (double g : sample_relaxed_gates(eta, 1.0, rng).noise)
            sum += g;
    // Mean of a standard Gumbel is the Euler-Mascheroni constant; sd pi/sqrt(6).
    const double se = 3.14159265358979 / std::sqrt(6.0) / std::sqrt(20000.0);
    EXPECT_NEAR(sum / 20000.0, 0.5772156649, 4 * se);
}

TEST(Objective, BackgroundOnly)
{
    Rng rng(16);
    auto x = random_matrix(6, 3, rng);
    auto p = random_params(1, 3, rng);
    GateSample g{all(3, 0.0), 1.0, all(3, 0.0)};
    PriorSpec prior{all(3, 0.5), PriorMode::NonInformative};
    double expected = 0;
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            expected -= gaussian_log_pdf(x(i, j), 0.0, 2.0);
    EXPECT_NEAR(objective(x, p, g, prior, 0.0), expected, 1e-10);
}

TEST(Objective, KlVanishesAtPriorLogits)
{
    Rng rng(17);
    auto x = random_matrix(10, 4, rng);
    auto p = random_params(2, 4, rng);
    auto prior = random_prior(4, rng);
    for (std::size_t j = 0; j < 4; ++j)
        p.eta[j] = logit(prior.rho[j]);
    auto g = sample_relaxed_gates(p.eta, 0.5, rng);
    EXPECT_NEAR(objective(x, p, g, prior, 1000.0), objective(x, p, g, prior, 0.0), 1e-9);
}

TEST(Objective, MatchesExtendedPrecisionOracle)
{
    Rng rng(18);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t k = trial == 0 ? 1 : 1 + trial % 3;
        const std::size_t n = trial == 0 ? 4 : 4 + trial;
        const std::size_t d = trial == 0 ? 2 : 1 + trial % 4;
        auto x = random_matrix(n, d, rng);
        auto p = random_params(k, d, rng);
        auto prior = random_prior(d, rng);
        auto g = sample_relaxed_gates(p.eta, 0.7, rng);
        const double beta = static_cast<double>(n);
        const long double expected = naive_objective(x, p, g.values, prior, beta);
        const double got = objective(x, p, g, prior, beta);
        EXPECT_NEAR(got, static_cast<double>(expected), 1e-10 * std::max(1.0L, std::abs(expected)));
    }
}

TEST(ComponentLogDensities, AgreesWithPerRowEvaluation)
{
    Rng rng(19);
    auto x = random_matrix(12, 6, rng);
    auto p = random_params(3, 6, rng);
    auto g = sample_relaxed_gates(p.eta, 0.4, rng);
    const Matrix ell = component_log_densities(x, p, g.values);
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t k = 0; k < 3; ++k)
            EXPECT_NEAR(ell(i, k), gated_component_log_density(x.row(i), k, p, g.values), 1e-10);
}

TEST(PriorClamp, BoundsRho)
{
    PriorSpec prior{{0.0, 0.005, 0.5, 0.999, 1.0}, PriorMode::Random};
    clamp_prior(prior);
    EXPECT_EQ(prior.rho, (std::vector<double>{0.01, 0.01, 0.5, 0.99, 0.99}));
}

TEST(ModelParams, ValidateCatchesBadShapes)
{
    Rng rng(20);
    auto p = random_params(2, 3, rng);
    EXPECT_NO_THROW(p.validate());
    auto q = p;
    q.eta.push_back(0);
    EXPECT_THROW(q.validate(), ModelError);
    q = p;
    q.mu(0, 0) = NAN;
    EXPECT_THROW(q.validate(), ModelError);
    q = p;
    q.alpha.clear();
    EXPECT_THROW(q.validate(), ModelError);
}

TEST(PriorModeNames, RoundTrip)
{
    for (auto m : {PriorMode::Informative, PriorMode::NonInformative, PriorMode::Random})
        EXPECT_EQ(prior_mode_from_string(to_string(m)), m);
    EXPECT_EQ(prior_mode_from_string("info"), PriorMode::Informative);
    EXPECT_THROW(prior_mode_from_string("bogus"), ModelError);
}
