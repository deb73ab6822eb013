#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "divi/metrics.hpp"
#include "divi/rng.hpp"

using namespace divi;

namespace {

// Adjusted Rand index from explicit pair agreement counts.
double pair_count_ari(const std::vector<int>& a, const std::vector<int>& b)
{
    const std::size_t n = a.size();
    double both = 0, only_a = 0, only_b = 0, pairs = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool sa = a[i] == a[j], sb = b[i] == b[j];
            both += sa && sb;
            only_a += sa;
            only_b += sb;
            ++pairs;
        }
    const double expected = only_a * only_b / pairs;
    const double max_index = 0.5 * (only_a + only_b);
    if (max_index == expected)
        return 1.0;
    return (both - expected) / (max_index - expected);
}

std::vector<int> random_partition(std::size_t n, int k, Rng& rng)
{
    std::uniform_int_distribution<int> pick(0, k - 1);
    std::vector<int> out(n);
    for (auto& v : out)
        v = pick(rng);
    return out;
}

std::vector<int> relabel(const std::vector<int>& a, int offset)
{
    std::vector<int> out;
    for (int v : a)
        out.push_back(100 - 3 * v + offset);
    return out;
}

} // namespace

TEST(Ari, Examples)
{
    std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
    EXPECT_DOUBLE_EQ(adjusted_rand_index(a, a), 1.0);
    EXPECT_NEAR(adjusted_rand_index(a, b), -0.5, 1e-12);
    EXPECT_DOUBLE_EQ(adjusted_rand_index(a, std::vector<int>{5, 5, 2, 2}), 1.0);
    EXPECT_DOUBLE_EQ(adjusted_rand_index(std::vector<int>{0, 0, 0}, std::vector<int>{1, 1, 1}), 1.0);
}

TEST(Ari, Errors)
{
    EXPECT_ANY_THROW(adjusted_rand_index(std::vector<int>{0, 1}, std::vector<int>{0}));
    EXPECT_ANY_THROW(adjusted_rand_index(std::vector<int>{0}, std::vector<int>{0}));
}

TEST(Ari, MatchesPairCountingOracle)
{
    Rng rng(1);
    std::uniform_int_distribution<int> n_dist(2, 8), k_dist(1, 5);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = n_dist(rng);
        auto a = random_partition(n, k_dist(rng), rng);
        auto b = random_partition(n, k_dist(rng), rng);
        EXPECT_NEAR(adjusted_rand_index(a, b), pair_count_ari(a, b), 1e-12);
    }
}

TEST(Ari, MatchesPairCountingOnAllSmallPartitionPairs)
{
    // Every pair of labelings of N = 5 over at most 3 labels.
    const std::size_t n = 5;
    std::vector<std::vector<int>> all;
    for (int code = 0; code < 243; ++code) {
        std::vector<int> p(n);
        int c = code;
        for (auto& v : p) {
            v = c % 3;
            c /= 3;
        }
        all.push_back(p);
    }
    for (const auto& a : all)
        for (const auto& b : all)
            ASSERT_NEAR(adjusted_rand_index(a, b), pair_count_ari(a, b), 1e-12);
}

TEST(Ari, RelabelingInvariance)
{
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        auto a = random_partition(30, 4, rng);
        auto b = random_partition(30, 3, rng);
        EXPECT_NEAR(adjusted_rand_index(a, b), adjusted_rand_index(relabel(a, 1), relabel(b, 7)), 1e-12);
        EXPECT_NEAR(adjusted_rand_index(a, b), adjusted_rand_index(b, a), 1e-12);
    }
}

TEST(Nmi, Examples)
{
    std::vector<int> a{0, 0, 1, 1}, b{0, 1, 0, 1};
    EXPECT_NEAR(normalized_mutual_info(a, a), 1.0, 1e-12);
    EXPECT_NEAR(normalized_mutual_info(a, b), 0.0, 1e-12);
    EXPECT_DOUBLE_EQ(normalized_mutual_info(std::vector<int>{0, 0, 0}, std::vector<int>{2, 2, 2}), 1.0);
    EXPECT_DOUBLE_EQ(normalized_mutual_info(std::vector<int>{0, 0, 0}, std::vector<int>{0, 1, 1}), 0.0);
    EXPECT_ANY_THROW(normalized_mutual_info(std::vector<int>{0, 1}, std::vector<int>{0}));
}

TEST(Nmi, SymmetricBoundedAndInvariant)
{
    Rng rng(3);
    std::uniform_int_distribution<int> n_dist(2, 40), k_dist(1, 6);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = n_dist(rng);
        auto a = random_partition(n, k_dist(rng), rng);
        auto b = random_partition(n, k_dist(rng), rng);
        const double v = normalized_mutual_info(a, b);
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0 + 1e-12);
        EXPECT_NEAR(v, normalized_mutual_info(b, a), 1e-12);
        EXPECT_NEAR(v, normalized_mutual_info(relabel(a, 2), relabel(b, 5)), 1e-12);
    }
}

TEST(ActiveDimensions, ThresholdIsStrict)
{
    EXPECT_EQ(active_dimensions(std::vector<double>(7, 0.99)).count, 7u);
    EXPECT_EQ(active_dimensions(std::vector<double>(7, 0.01)).count, 0u);
    auto a = active_dimensions(std::vector<double>{0.5, 0.5000001, 0.2});
    EXPECT_EQ(a.count, 1u);
    EXPECT_EQ(a.mask, (std::vector<bool>{false, true, false}));
    EXPECT_EQ(active_dimensions(std::vector<double>{0.3, 0.8}, 0.25).count, 2u);
}

TEST(FeatureF1, Examples)
{
    std::vector<bool> truth(100, false);
    for (int j = 0; j < 10; ++j)
        truth[j] = true;
    EXPECT_DOUBLE_EQ(feature_f1(truth, truth), 1.0);
    EXPECT_NEAR(feature_f1(std::vector<bool>(100, true), truth), 0.1818182, 1e-7);
    std::vector<bool> disjoint(100, false);
    disjoint[50] = true;
    EXPECT_DOUBLE_EQ(feature_f1(disjoint, truth), 0.0);
    EXPECT_DOUBLE_EQ(feature_f1(std::vector<bool>(100, false), truth), 0.0);
    EXPECT_ANY_THROW(feature_f1(std::vector<bool>{}, std::vector<bool>{}));
    EXPECT_ANY_THROW(feature_f1(std::vector<bool>(3), truth));
}
