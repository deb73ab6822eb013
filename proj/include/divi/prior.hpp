#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "divi/datagen.hpp"
#include "divi/matrix.hpp"
#include "divi/model.hpp"

namespace divi {

inline constexpr std::size_t kDefaultRoughClusters = 5;
inline constexpr std::size_t kRoughKMeansIterations = 50;
inline constexpr double kRoughKMeansTolerance = 1e-4;
inline constexpr double kLlrVarianceFloor = 1e-6;
inline constexpr double kPriorContrast = 6.0;

struct FeatureScores {
    std::vector<double> kw;
    std::vector<double> llr;
    std::vector<double> combined;
};

// Single k-means++/Lloyd run used to get a coarse partition for scoring features.
Labels rough_kmeans(const Matrix& x, std::size_t k0, std::uint64_t seed);

// Kruskal-Wallis H with mid-ranks and the usual tie correction. All-tied
// columns score 0.
double kruskal_wallis(std::span<const double> column, std::span<const int> labels);

// n log(pooled variance) - sum_k n_k log(group variance), ML variances floored
// at `variance_floor` (pass 0 to disable), clamped below at 0.
double gaussian_llr(std::span<const double> column, std::span<const int> labels,
                    double variance_floor = kLlrVarianceFloor);

// Both scores per feature, each min-max normalized, then averaged.
FeatureScores score_features(const Matrix& x, const Labels& labels);

// Maps a combined score in [0, 1] to a clamped prior inclusion probability.
double score_to_prior(double combined);

PriorSpec build_prior(const Matrix& x, PriorMode mode, std::size_t k0, std::uint64_t seed);

} // namespace divi
