#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace divi {

// Hubert-Arabie adjusted Rand index. Returns 1 when the chance-corrected
// denominator vanishes (both partitions trivial and identical).
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

// Mutual information over the arithmetic mean of the two entropies (natural
// log). Two single-cluster partitions score 1; exactly one scores 0.
double normalized_mutual_info(std::span<const int> a, std::span<const int> b);

struct ActiveDimensions {
    std::vector<bool> mask;
    std::size_t count = 0;
};

inline constexpr double kActiveThreshold = 0.5;

// mask_j = gate_probs_j > threshold (strict).
ActiveDimensions active_dimensions(std::span<const double> gate_probs, double threshold = kActiveThreshold);

// F1 of the predicted informative set; 0 when nothing is predicted.
double feature_f1(const std::vector<bool>& predicted, const std::vector<bool>& truth);

} // namespace divi
