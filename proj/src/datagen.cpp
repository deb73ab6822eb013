#include "divi/datagen.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "divi/rng.hpp"

namespace divi {

namespace {

constexpr std::size_t kClusters = 3;
constexpr double kClusterMeans[kClusters] = {-2.0, 0.0, 2.0};

enum class Signal { Gaussian, StudentT5 };

void check_shape(std::size_t n, std::size_t d)
{
    if (d < kInformativeDims)
        throw std::invalid_argument("generator requires d >= 10");
    if (n < kClusters)
        throw std::invalid_argument("generator requires n >= 3");
}

Dataset skeleton(std::size_t n, std::size_t d)
{
    Dataset ds;
    ds.x = Matrix(n, d);
    ds.labels.reserve(n);
    const auto sizes = balanced_sizes(n, kClusters);
    for (std::size_t k = 0; k < kClusters; ++k)
        ds.labels.insert(ds.labels.end(), sizes[k], static_cast<int>(k));
    ds.informative_mask.assign(d, false);
    for (std::size_t j = 0; j < kInformativeDims; ++j)
        ds.informative_mask[j] = true;
    return ds;
}

void fill_signal(Dataset& ds, Signal signal, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, 1.0);
    std::student_t_distribution<double> student(5.0);
    const double t_scale = std::sqrt(3.0 / 5.0);
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const double c = kClusterMeans[ds.labels[i]];
        for (std::size_t j = 0; j < kInformativeDims; ++j) {
            const double eps = signal == Signal::Gaussian ? normal(rng) : t_scale * student(rng);
            ds.x(i, j) = c + eps;
        }
    }
}

void fill_independent_nuisance(Dataset& ds, Rng& rng)
{
    std::normal_distribution<double> normal(0.0, kNuisanceScale);
    for (std::size_t i = 0; i < ds.n(); ++i)
        for (std::size_t j = kInformativeDims; j < ds.d(); ++j)
            ds.x(i, j) = normal(rng);
}

} // namespace

std::vector<std::size_t> balanced_sizes(std::size_t n, std::size_t k)
{
    std::vector<std::size_t> sizes(k, n / k);
    for (std::size_t r = 0; r < n % k; ++r)
        ++sizes[r];
    return sizes;
}

Dataset gen_matched(std::size_t n, std::size_t d, std::uint64_t seed)
{
    check_shape(n, d);
    Dataset ds = skeleton(n, d);
    Rng rng(seed);
    fill_signal(ds, Signal::Gaussian, rng);
    fill_independent_nuisance(ds, rng);
    return ds;
}

Dataset gen_heavy_tailed(std::size_t n, std::size_t d, std::uint64_t seed)
{
    check_shape(n, d);
    Dataset ds = skeleton(n, d);
    Rng rng(seed);
    fill_signal(ds, Signal::StudentT5, rng);
    fill_independent_nuisance(ds, rng);
    return ds;
}

Dataset gen_correlated(std::size_t n, std::size_t d, double rho, std::size_t block, std::uint64_t seed)
{
    check_shape(n, d);
    if (block == 0 || (d - kInformativeDims) % block != 0)
        throw std::invalid_argument("nuisance dimension count must be divisible by the block size");
    if (!(rho >= 0.0 && rho < 1.0))
        throw std::invalid_argument("block correlation must lie in [0, 1)");
    Dataset ds = skeleton(n, d);
    Rng rng(seed);
    fill_signal(ds, Signal::Gaussian, rng);

    std::normal_distribution<double> normal(0.0, 1.0);
    const double shared = std::sqrt(rho);
    const double own = std::sqrt(1.0 - rho);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t start = kInformativeDims; start < d; start += block) {
            const double z = normal(rng);
            for (std::size_t j = start; j < start + block; ++j)
                ds.x(i, j) = kNuisanceScale * (shared * z + own * normal(rng));
        }
    }
    return ds;
}

Dataset standardize(const Dataset& data)
{
    const std::size_t n = data.n();
    const std::size_t d = data.d();
    if (n < 2)
        throw std::invalid_argument("standardize requires at least two rows");
    Standardization stats;
    stats.mean.assign(d, 0.0);
    stats.std.assign(d, 1.0);
    for (std::size_t j = 0; j < d; ++j) {
        double m = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            m += data.x(i, j);
        m /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double diff = data.x(i, j) - m;
            ss += diff * diff;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        stats.mean[j] = m;
        stats.std[j] = sd > 0.0 ? sd : 1.0;
    }
    Dataset out = data;
    out.x = apply_standardization(data.x, stats);
    out.stats = std::move(stats);
    return out;
}

Matrix apply_standardization(const Matrix& x, const Standardization& stats)
{
    if (stats.mean.size() != x.cols() || stats.std.size() != x.cols())
        throw std::invalid_argument("standardization stats do not match column count");
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            out(i, j) = (x(i, j) - stats.mean[j]) / stats.std[j];
    return out;
}

Matrix unstandardize(const Matrix& x, const Standardization& stats)
{
    if (stats.mean.size() != x.cols() || stats.std.size() != x.cols())
        throw std::invalid_argument("standardization stats do not match column count");
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            out(i, j) = x(i, j) * stats.std[j] + stats.mean[j];
    return out;
}

} // namespace divi
