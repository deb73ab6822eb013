#include "divi/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "divi/model.hpp"

namespace divi {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b)
{
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        s += diff * diff;
    }
    return s;
}

void check_k(const Matrix& x, std::size_t k)
{
    if (k == 0)
        throw std::invalid_argument("k must be positive");
    if (k > x.rows())
        throw std::invalid_argument("k exceeds the number of samples");
}

Matrix kmeanspp_seed(const Matrix& x, std::size_t k, Rng& rng)
{
    const std::size_t n = x.rows();
    Matrix centers(k, x.cols());
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    const std::size_t first = pick(rng);
    std::copy(x.row(first).begin(), x.row(first).end(), centers.row(0).begin());

    std::vector<double> dist(n);
    for (std::size_t i = 0; i < n; ++i)
        dist[i] = squared_distance(x.row(i), centers.row(0));

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : dist)
            total += v;
        std::size_t chosen = n - 1;
        if (total > 0.0) {
            const double target = unif(rng) * total;
            double acc = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                acc += dist[i];
                if (acc > target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = pick(rng);
        }
        std::copy(x.row(chosen).begin(), x.row(chosen).end(), centers.row(c).begin());
        for (std::size_t i = 0; i < n; ++i)
            dist[i] = std::min(dist[i], squared_distance(x.row(i), centers.row(c)));
    }
    return centers;
}

// Assigns every row to its nearest center (lowest index on ties) and returns the inertia.
double assign(const Matrix& x, const Matrix& centers, Labels& labels, std::vector<double>& dist)
{
    double inertia = 0.0;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        int best_k = 0;
        for (std::size_t c = 0; c < centers.rows(); ++c) {
            const double s = squared_distance(x.row(i), centers.row(c));
            if (s < best) {
                best = s;
                best_k = static_cast<int>(c);
            }
        }
        labels[i] = best_k;
        dist[i] = best;
        inertia += best;
    }
    return inertia;
}

} // namespace

KMeansResult lloyd_kmeans(const Matrix& x, std::size_t k, const LloydOptions& options, Rng& rng)
{
    check_k(x, k);
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();

    KMeansResult res;
    res.centers = kmeanspp_seed(x, k, rng);
    res.labels.assign(n, 0);
    std::vector<double> dist(n);
    double inertia = assign(x, res.centers, res.labels, dist);
    res.inertia_trace.push_back(inertia);

    std::vector<std::size_t> counts(k);
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        // Update step.
        std::fill(res.centers.values().begin(), res.centers.values().end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<std::size_t>(res.labels[i]);
            ++counts[c];
            auto row = res.centers.row(c);
            const auto xi = x.row(i);
            for (std::size_t j = 0; j < d; ++j)
                row[j] += xi[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
                std::copy(x.row(far).begin(), x.row(far).end(), res.centers.row(c).begin());
                dist[far] = 0.0;
                continue;
            }
            for (double& v : res.centers.row(c))
                v /= static_cast<double>(counts[c]);
        }

        const double next = assign(x, res.centers, res.labels, dist);
        res.inertia_trace.push_back(next);
        res.iterations = it + 1;
        const double change = inertia > 0.0 ? (inertia - next) / inertia : 0.0;
        inertia = next;
        if (std::abs(change) < options.tolerance)
            break;
    }
    res.inertia = inertia;
    return res;
}

KMeansResult kmeans_fit(const Matrix& x, std::size_t k, std::size_t restarts, std::uint64_t seed)
{
    check_k(x, k);
    Rng rng(seed);
    KMeansResult best;
    best.inertia = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
        KMeansResult run = lloyd_kmeans(x, k, LloydOptions{}, rng);
        if (run.inertia < best.inertia)
            best = std::move(run);
    }
    return best;
}

namespace {

GmmResult em_from_partition(const Matrix& x, std::size_t k, const Labels& init)
{
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    constexpr std::size_t kMaxIter = 200;
    constexpr double kTol = 1e-7;

    GmmResult g;
    g.means = Matrix(k, d);
    g.variances = Matrix(k, d);
    g.weights.assign(k, 0.0);

    // Responsibilities start as the hard k-means partition.
    Matrix resp(n, k);
    for (std::size_t i = 0; i < n; ++i)
        resp(i, static_cast<std::size_t>(init[i])) = 1.0;

    auto m_step = [&]() {
        std::vector<double> mass(k, 0.0);
        std::fill(g.means.values().begin(), g.means.values().end(), 0.0);
        std::fill(g.variances.values().begin(), g.variances.values().end(), 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < k; ++c) {
                const double r = resp(i, c);
                mass[c] += r;
                auto m = g.means.row(c);
                const auto xi = x.row(i);
                for (std::size_t j = 0; j < d; ++j)
                    m[j] += r * xi[j];
            }
        for (std::size_t c = 0; c < k; ++c) {
            const double denom = std::max(mass[c], std::numeric_limits<double>::min());
            for (double& v : g.means.row(c))
                v /= denom;
        }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < k; ++c) {
                const double r = resp(i, c);
                auto v = g.variances.row(c);
                const auto m = g.means.row(c);
                const auto xi = x.row(i);
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = xi[j] - m[j];
                    v[j] += r * diff * diff;
                }
            }
        for (std::size_t c = 0; c < k; ++c) {
            const double denom = std::max(mass[c], std::numeric_limits<double>::min());
            for (double& v : g.variances.row(c))
                v = std::max(v / denom, kGmmVarianceFloor);
            g.weights[c] = std::max(mass[c], std::numeric_limits<double>::min()) / static_cast<double>(n);
        }
    };

    auto e_step = [&]() {
        std::vector<double> terms(k);
        std::vector<double> log_w(k), norm(k, 0.0);
        for (std::size_t c = 0; c < k; ++c) {
            log_w[c] = std::log(g.weights[c]);
            for (double v : g.variances.row(c))
                norm[c] += kLog2Pi + std::log(v);
        }
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto xi = x.row(i);
            for (std::size_t c = 0; c < k; ++c) {
                const auto m = g.means.row(c);
                const auto v = g.variances.row(c);
                double quad = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double diff = xi[j] - m[j];
                    quad += diff * diff / v[j];
                }
                terms[c] = log_w[c] - 0.5 * (norm[c] + quad);
            }
            const double lse = log_sum_exp(terms);
            ll += lse;
            for (std::size_t c = 0; c < k; ++c)
                resp(i, c) = std::exp(terms[c] - lse);
        }
        return ll;
    };

    m_step();
    double ll = e_step();
    g.loglik_trace.push_back(ll);
    for (std::size_t it = 0; it < kMaxIter; ++it) {
        m_step();
        const double next = e_step();
        g.loglik_trace.push_back(next);
        g.iterations = it + 1;
        const double change = std::abs(next - ll) / std::max(1.0, std::abs(ll));
        ll = next;
        if (change < kTol)
            break;
    }
    g.log_likelihood = ll;

    g.labels.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (resp(i, c) > resp(i, best))
                best = c;
        g.labels[i] = static_cast<int>(best);
    }
    return g;
}

} // namespace

GmmResult diag_gmm_fit(const Matrix& x, std::size_t k, std::size_t restarts, std::uint64_t seed)
{
    check_k(x, k);
    Rng rng(seed);
    GmmResult best;
    best.log_likelihood = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
        const KMeansResult start = lloyd_kmeans(x, k, LloydOptions{}, rng);
        GmmResult run = em_from_partition(x, k, start.labels);
        if (run.log_likelihood > best.log_likelihood)
            best = std::move(run);
    }
    return best;
}

} // namespace divi
