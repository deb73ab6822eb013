#include "divi/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace divi {

namespace {

// Relabels to 0..m-1 in order of first sorted value.
std::vector<std::size_t> compact(std::span<const int> labels, std::size_t& count)
{
    std::vector<int> uniq(labels.begin(), labels.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    count = uniq.size();
    std::vector<std::size_t> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = static_cast<std::size_t>(std::lower_bound(uniq.begin(), uniq.end(), labels[i]) - uniq.begin());
    return out;
}

struct Contingency {
    std::size_t rows = 0, cols = 0, n = 0;
    std::vector<double> table, row_sums, col_sums;
    double operator()(std::size_t i, std::size_t j) const { return table[i * cols + j]; }
};

Contingency contingency(std::span<const int> a, std::span<const int> b)
{
    if (a.size() != b.size())
        throw std::invalid_argument("partitions have different lengths");
    if (a.size() < 2)
        throw std::invalid_argument("partitions need at least two elements");
    Contingency c;
    const auto ca = compact(a, c.rows);
    const auto cb = compact(b, c.cols);
    c.n = a.size();
    c.table.assign(c.rows * c.cols, 0.0);
    c.row_sums.assign(c.rows, 0.0);
    c.col_sums.assign(c.cols, 0.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        c.table[ca[i] * c.cols + cb[i]] += 1.0;
        c.row_sums[ca[i]] += 1.0;
        c.col_sums[cb[i]] += 1.0;
    }
    return c;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

} // namespace

double adjusted_rand_index(std::span<const int> a, std::span<const int> b)
{
    const Contingency c = contingency(a, b);
    double index = 0.0;
    for (double v : c.table)
        index += comb2(v);
    double sum_a = 0.0, sum_b = 0.0;
    for (double v : c.row_sums)
        sum_a += comb2(v);
    for (double v : c.col_sums)
        sum_b += comb2(v);
    const double expected = sum_a * sum_b / comb2(static_cast<double>(c.n));
    const double max_index = 0.5 * (sum_a + sum_b);
    const double denom = max_index - expected;
    if (denom == 0.0)
        return 1.0;
    return (index - expected) / denom;
}

double normalized_mutual_info(std::span<const int> a, std::span<const int> b)
{
    const Contingency c = contingency(a, b);
    const double n = static_cast<double>(c.n);
    auto entropy = [n](const std::vector<double>& sums) {
        double h = 0.0;
        for (double v : sums)
            if (v > 0.0)
                h -= (v / n) * std::log(v / n);
        return h;
    };
    const double ha = entropy(c.row_sums);
    const double hb = entropy(c.col_sums);
    if (c.rows == 1 && c.cols == 1)
        return 1.0;
    if (c.rows == 1 || c.cols == 1)
        return 0.0;
    double mi = 0.0;
    for (std::size_t i = 0; i < c.rows; ++i)
        for (std::size_t j = 0; j < c.cols; ++j) {
            const double v = c(i, j);
            if (v > 0.0)
                mi += (v / n) * std::log(v * n / (c.row_sums[i] * c.col_sums[j]));
        }
    const double nmi = mi / (0.5 * (ha + hb));
    return std::clamp(nmi, 0.0, 1.0);
}

ActiveDimensions active_dimensions(std::span<const double> gate_probs, double threshold)
{
    if (!(threshold > 0.0 && threshold < 1.0))
        throw std::invalid_argument("activity threshold must lie in (0, 1)");
    ActiveDimensions out;
    out.mask.resize(gate_probs.size());
    for (std::size_t j = 0; j < gate_probs.size(); ++j) {
        out.mask[j] = gate_probs[j] > threshold;
        out.count += out.mask[j] ? 1 : 0;
    }
    return out;
}

double feature_f1(const std::vector<bool>& predicted, const std::vector<bool>& truth)
{
    if (predicted.size() != truth.size())
        throw std::invalid_argument("feature masks have different lengths");
    const auto n_true = static_cast<double>(std::count(truth.begin(), truth.end(), true));
    if (n_true == 0.0)
        throw std::invalid_argument("truth mask has no informative features");
    const auto n_pred = static_cast<double>(std::count(predicted.begin(), predicted.end(), true));
    if (n_pred == 0.0)
        return 0.0;
    double hits = 0.0;
    for (std::size_t j = 0; j < truth.size(); ++j)
        if (predicted[j] && truth[j])
            hits += 1.0;
    if (hits == 0.0)
        return 0.0;
    const double precision = hits / n_pred;
    const double recall = hits / n_true;
    return 2.0 * precision * recall / (precision + recall);
}

} // namespace divi
