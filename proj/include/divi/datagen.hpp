#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "divi/matrix.hpp"

namespace divi {

using Labels = std::vector<int>;

struct Standardization {
    std::vector<double> mean;
    std::vector<double> std;
};

/// Samples in rows. `labels` and `informative_mask` are empty when the data
/// carries no ground truth.
struct Dataset {
    Matrix x;
    Labels labels;
    std::vector<bool> informative_mask;
    std::optional<Standardization> stats;

    std::size_t n() const noexcept { return x.rows(); }
    std::size_t d() const noexcept { return x.cols(); }
};

inline constexpr std::size_t kInformativeDims = 10;
inline constexpr double kNuisanceScale = 3.0;

// Three clusters with means {-2, 0, 2} on the first ten dimensions (unit
// within-cluster noise) and N(0, 3^2) nuisance dimensions. Returned unstandardized.
Dataset gen_matched(std::size_t n, std::size_t d, std::uint64_t seed);

// As gen_matched but the informative noise is Student-t(5) rescaled to unit variance.
Dataset gen_heavy_tailed(std::size_t n, std::size_t d, std::uint64_t seed);

// As gen_matched but nuisance dimensions are block-correlated with
// within-block correlation `rho` and marginal scale 3.
Dataset gen_correlated(std::size_t n, std::size_t d, double rho, std::size_t block, std::uint64_t seed);

// Cluster sizes for n samples over k clusters, remainder to lower indices.
std::vector<std::size_t> balanced_sizes(std::size_t n, std::size_t k);

// Per-column (x - mean) / sd with the N-1 sample sd. Zero-variance columns are
// only centered and their sd is recorded as 1.
Dataset standardize(const Dataset& data);

Matrix unstandardize(const Matrix& x, const Standardization& stats);
Matrix apply_standardization(const Matrix& x, const Standardization& stats);

} // namespace divi
