#include "divi/prior.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>

#include "divi/baselines.hpp"
#include "divi/rng.hpp"

namespace divi {

namespace {

// Group id -> indices, requiring at least two non-empty groups.
std::map<int, std::vector<std::size_t>> groups_of(std::span<const double> column, std::span<const int> labels)
{
    if (column.size() != labels.size())
        throw std::invalid_argument("column and labels have different lengths");
    std::map<int, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i)
        groups[labels[i]].push_back(i);
    if (groups.size() < 2)
        throw std::invalid_argument("at least two non-empty groups are required");
    return groups;
}

void min_max_normalize(std::vector<double>& v)
{
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    const double low = *lo;
    const double range = *hi - low;
    for (double& x : v)
        x = range > 0.0 ? (x - low) / range : 0.5;
}

} // namespace

Labels rough_kmeans(const Matrix& x, std::size_t k0, std::uint64_t seed)
{
    if (k0 < 2)
        throw std::invalid_argument("rough k-means needs k0 >= 2");
    if (x.rows() < k0)
        throw std::invalid_argument("rough k-means needs at least k0 samples");
    Rng rng(seed);
    LloydOptions opts;
    opts.max_iterations = kRoughKMeansIterations;
    opts.tolerance = kRoughKMeansTolerance;
    return lloyd_kmeans(x, k0, opts, rng).labels;
}

double kruskal_wallis(std::span<const double> column, std::span<const int> labels)
{
    const auto groups = groups_of(column, labels);
    const std::size_t n = column.size();

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return column[a] < column[b]; });

    std::vector<double> rank(n);
    double tie_sum = 0.0;
    for (std::size_t start = 0; start < n;) {
        std::size_t end = start + 1;
        while (end < n && column[order[end]] == column[order[start]])
            ++end;
        const double mid = 0.5 * static_cast<double>(start + end + 1); // ranks start+1 .. end
        for (std::size_t t = start; t < end; ++t)
            rank[order[t]] = mid;
        const auto t = static_cast<double>(end - start);
        tie_sum += t * t * t - t;
        start = end;
    }

    const auto nd = static_cast<double>(n);
    const double correction = 1.0 - tie_sum / (nd * nd * nd - nd);
    if (correction <= 0.0)
        return 0.0;

    const double centre = 0.5 * (nd + 1.0);
    double between = 0.0;
    for (const auto& [id, members] : groups) {
        double mean_rank = 0.0;
        for (std::size_t i : members)
            mean_rank += rank[i];
        const auto nk = static_cast<double>(members.size());
        mean_rank /= nk;
        between += nk * (mean_rank - centre) * (mean_rank - centre);
    }
    return 12.0 / (nd * (nd + 1.0)) * between / correction;
}

double gaussian_llr(std::span<const double> column, std::span<const int> labels, double variance_floor)
{
    const auto groups = groups_of(column, labels);
    const auto nd = static_cast<double>(column.size());

    auto ml_variance = [&](const std::vector<std::size_t>* members) {
        double m = 0.0, count = 0.0;
        auto visit = [&](auto&& f) {
            if (members) {
                for (std::size_t i : *members)
                    f(column[i]);
            } else {
                for (double v : column)
                    f(v);
            }
        };
        visit([&](double v) {
            m += v;
            count += 1.0;
        });
        m /= count;
        double ss = 0.0;
        visit([&](double v) { ss += (v - m) * (v - m); });
        return std::max(ss / count, variance_floor);
    };

    double llr = nd * std::log(ml_variance(nullptr));
    for (const auto& [id, members] : groups)
        llr -= static_cast<double>(members.size()) * std::log(ml_variance(&members));
    return std::max(llr, 0.0);
}

FeatureScores score_features(const Matrix& x, const Labels& labels)
{
    FeatureScores s;
    const std::size_t d = x.cols();
    s.kw.resize(d);
    s.llr.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
        const auto col = x.column(j);
        s.kw[j] = kruskal_wallis(col, labels);
        s.llr[j] = gaussian_llr(col, labels);
    }
    std::vector<double> kw_n = s.kw, llr_n = s.llr;
    min_max_normalize(kw_n);
    min_max_normalize(llr_n);
    s.combined.resize(d);
    for (std::size_t j = 0; j < d; ++j)
        s.combined[j] = 0.5 * kw_n[j] + 0.5 * llr_n[j];
    return s;
}

double score_to_prior(double combined)
{
    return std::clamp(sigmoid(kPriorContrast * (combined - 0.5)), kPriorClamp, 1.0 - kPriorClamp);
}

PriorSpec build_prior(const Matrix& x, PriorMode mode, std::size_t k0, std::uint64_t seed)
{
    PriorSpec prior;
    prior.mode = mode;
    const std::size_t d = x.cols();
    switch (mode) {
    case PriorMode::NonInformative:
        prior.rho.assign(d, 0.5);
        break;
    case PriorMode::Random: {
        Rng rng(seed);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        prior.rho.resize(d);
        for (double& r : prior.rho)
            r = unif(rng);
        break;
    }
    case PriorMode::Informative: {
        const Labels rough = rough_kmeans(x, k0, seed);
        const FeatureScores scores = score_features(x, rough);
        prior.rho.resize(d);
        std::transform(scores.combined.begin(), scores.combined.end(), prior.rho.begin(), score_to_prior);
        break;
    }
    }
    clamp_prior(prior);
    return prior;
}

} // namespace divi
