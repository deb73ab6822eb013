#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "divi/baselines.hpp"
#include "divi/datagen.hpp"
#include "divi/metrics.hpp"
#include "test_util.hpp"

using namespace divi;

TEST(KMeans, DistinctPointsHaveZeroInertia)
{
    Matrix x(4, 2, std::vector<double>{0, 0, 3, 1, -2, 5, 7, 7});
    auto r = kmeans_fit(x, 4, 3, 1);
    EXPECT_DOUBLE_EQ(r.inertia, 0.0);
    EXPECT_EQ(std::set<int>(r.labels.begin(), r.labels.end()).size(), 4u);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 2; ++j)
            EXPECT_EQ(r.centers(r.labels[i], j), x(i, j));
}

TEST(KMeans, RejectsTooManyClusters)
{
    Matrix x(3, 1, std::vector<double>{1, 2, 3});
    EXPECT_ANY_THROW(kmeans_fit(x, 4, 1, 0));
}

TEST(KMeans, InertiaTraceNonIncreasing)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset data = standardize(gen_matched(300, 30, seed));
        Rng rng(seed);
        auto r = lloyd_kmeans(data.x, 4, LloydOptions{}, rng);
        for (std::size_t t = 1; t < r.inertia_trace.size(); ++t)
            EXPECT_LE(r.inertia_trace[t], r.inertia_trace[t - 1] * (1 + 1e-12) + 1e-8);
    }
}

TEST(KMeans, DuplicatedRowsDoubleInertia)
{
    const Dataset data = standardize(gen_matched(120, 12, 3));
    Matrix doubled = data.x;
    for (std::size_t i = 0; i < data.n(); ++i)
        doubled.append_row(data.x.row(i));
    auto a = kmeans_fit(data.x, 3, 10, 5);
    auto b = kmeans_fit(doubled, 3, 10, 5);
    EXPECT_NEAR(b.inertia, 2 * a.inertia, 1e-8 * a.inertia);
    std::multiset<double> ca(a.centers.values().begin(), a.centers.values().end());
    std::multiset<double> cb(b.centers.values().begin(), b.centers.values().end());
    auto ia = ca.begin();
    for (auto ib = cb.begin(); ib != cb.end(); ++ia, ++ib)
        EXPECT_NEAR(*ia, *ib, 1e-9);
}

TEST(KMeans, TranslationInvariant)
{
    const Dataset data = standardize(gen_matched(150, 15, 4));
    Matrix moved = data.x;
    for (std::size_t i = 0; i < moved.rows(); ++i)
        for (std::size_t j = 0; j < moved.cols(); ++j)
            moved(i, j) += 10.0 + static_cast<double>(j);
    auto a = kmeans_fit(data.x, 3, 5, 9);
    auto b = kmeans_fit(moved, 3, 5, 9);
    EXPECT_DOUBLE_EQ(adjusted_rand_index(a.labels, b.labels), 1.0);
    EXPECT_NEAR(a.inertia, b.inertia, 1e-8 * a.inertia);
}

TEST(KMeans, DeterministicGivenSeed)
{
    const Dataset data = standardize(gen_matched(200, 20, 5));
    auto a = kmeans_fit(data.x, 3, 4, 17);
    auto b = kmeans_fit(data.x, 3, 4, 17);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.centers, b.centers);
}

TEST(Gmm, SingleComponentIsColumnMle)
{
    Rng rng(6);
    auto x = divi::testing::random_matrix(50, 3, rng, 2.0);
    auto r = diag_gmm_fit(x, 1, 2, 1);
    double expected_ll = 0;
    for (std::size_t j = 0; j < 3; ++j) {
        auto c = x.column(j);
        double m = 0, v = 0;
        for (double a : c)
            m += a;
        m /= 50;
        for (double a : c)
            v += (a - m) * (a - m);
        v /= 50;
        EXPECT_NEAR(r.means(0, j), m, 1e-12);
        EXPECT_NEAR(r.variances(0, j), v, 1e-12);
        expected_ll += -0.5 * 50 * (std::log(2 * M_PI * v) + 1.0);
    }
    EXPECT_NEAR(r.log_likelihood, expected_ll, 1e-8);
    EXPECT_NEAR(r.weights[0], 1.0, 1e-15);
}

TEST(Gmm, LogLikelihoodTraceNonDecreasing)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Dataset data = standardize(gen_matched(300, 30, seed));
        auto r = diag_gmm_fit(data.x, 3, 2, seed);
        for (std::size_t t = 1; t < r.loglik_trace.size(); ++t)
            EXPECT_GE(r.loglik_trace[t], r.loglik_trace[t - 1] - 1e-8 * std::abs(r.loglik_trace[t - 1]));
        for (double v : r.variances.values())
            EXPECT_GE(v, kGmmVarianceFloor);
    }
}

TEST(Gmm, DeterministicAndRecoversClusters)
{
    const Dataset data = standardize(gen_matched(1000, 100, derive_seed(0, "datagen")));
    auto a = diag_gmm_fit(data.x, 3, 5, 3);
    auto b = diag_gmm_fit(data.x, 3, 5, 3);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_GE(adjusted_rand_index(a.labels, data.labels), 0.95);
}
