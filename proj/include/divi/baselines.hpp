#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "divi/datagen.hpp"
#include "divi/matrix.hpp"
#include "divi/rng.hpp"

namespace divi {

struct LloydOptions {
    std::size_t max_iterations = 300;
    double tolerance = 1e-6; // relative change in inertia
};

struct KMeansResult {
    Labels labels;
    Matrix centers;
    double inertia = 0.0;
    std::vector<double> inertia_trace;
    std::size_t iterations = 0;
};

struct GmmResult {
    Labels labels;
    Matrix means;
    Matrix variances;
    std::vector<double> weights;
    double log_likelihood = 0.0;
    std::vector<double> loglik_trace;
    std::size_t iterations = 0;
};

// One Lloyd run from k-means++ seeding. Empty clusters are re-seeded with the
// point farthest from its current center.
KMeansResult lloyd_kmeans(const Matrix& x, std::size_t k, const LloydOptions& options, Rng& rng);

// Best-of-`restarts` k-means by inertia.
KMeansResult kmeans_fit(const Matrix& x, std::size_t k, std::size_t restarts, std::uint64_t seed);

inline constexpr std::size_t kDefaultKMeansRestarts = 10;
inline constexpr std::size_t kDefaultGmmRestarts = 5;
inline constexpr double kGmmVarianceFloor = 1e-6;

// Diagonal-covariance Gaussian mixture fitted by EM from a k-means start.
// Best of `restarts` by final log-likelihood; labels by maximum responsibility.
GmmResult diag_gmm_fit(const Matrix& x, std::size_t k, std::size_t restarts, std::uint64_t seed);

} // namespace divi
