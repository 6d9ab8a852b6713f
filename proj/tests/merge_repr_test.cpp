#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "cubist/merge_repr.hpp"
#include "test_util.hpp"

namespace cubist {
namespace {

using Vec = std::vector<float>;

Vec max_per_dim(const std::vector<Vec>& members)
{
    return merge_max_per_dim<float>(testing::spans_of(members));
}

Vec max_vector(const std::vector<Vec>& members)
{
    return merge_max_vector<float>(testing::spans_of(members));
}

// Per-dimension scan written independently of the library.
Vec brute_max_per_dim(const std::vector<Vec>& members)
{
    Vec out(members[0].size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        std::size_t c = 0;
        for (std::size_t j = 0; j < members.size(); ++j) {
            if (std::fabs(members[j][i]) > std::fabs(members[c][i])) c = j;
        }
        out[i] = members[c][i];
    }
    return out;
}

TEST(MaxPerDim, FormulaExample)
{
    EXPECT_EQ(max_per_dim({{1, -3, 2}, {-2, 1, 2}}), (Vec{-2, -3, 2}));
}

TEST(MaxPerDim, SingletonAndIdentical)
{
    Vec v{0.5f, -1.25f, 3.0f};
    EXPECT_EQ(max_per_dim({v}), v);
    EXPECT_EQ(max_per_dim({v, v, v}), v);
}

TEST(MaxPerDim, SignedTieGoesToFirstMember)
{
    EXPECT_EQ(max_per_dim({{2}, {-2}}), (Vec{2}));
    EXPECT_EQ(max_per_dim({{-2}, {2}}), (Vec{-2}));
}

TEST(MaxPerDim, DimensionMismatch)
{
    EXPECT_THROW(max_per_dim({{1, 2}, {1}}), dimension_mismatch_error);
    EXPECT_THROW(max_per_dim({}), dimension_mismatch_error);
}

TEST(MaxPerDim, OracleAndDominance)
{
    std::mt19937 rng(31);
    std::normal_distribution<float> n(0, 1);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t members = 1 + rng() % 5, d = 1 + rng() % 64;
        std::vector<Vec> g(members, Vec(d));
        for (auto& m : g)
            for (auto& x : m) x = n(rng);
        const auto out = max_per_dim(g);
        ASSERT_EQ(out, brute_max_per_dim(g));
        for (std::size_t i = 0; i < d; ++i) {
            bool is_member_entry = false;
            for (const auto& m : g) {
                EXPECT_GE(std::fabs(out[i]), std::fabs(m[i]));
                is_member_entry |= (m[i] == out[i]);
            }
            EXPECT_TRUE(is_member_entry);
        }
        // idempotent
        EXPECT_EQ(max_per_dim({out, out}), out);
        // distinct magnitudes: permutation invariant
        auto perm = g;
        std::shuffle(perm.begin(), perm.end(), rng);
        EXPECT_EQ(max_per_dim(perm), out);
    }
}

TEST(WeightedAverage, Examples)
{
    const std::vector<Vec> a = {{2}, {4}};
    auto r = merge_weighted_average<float>(testing::spans_of(a), std::vector<std::uint32_t>{1, 1});
    EXPECT_EQ(r.token, (Vec{3}));
    EXPECT_EQ(r.size, 2u);

    const std::vector<Vec> b = {{2}, {6}};
    r = merge_weighted_average<float>(testing::spans_of(b), std::vector<std::uint32_t>{3, 1});
    EXPECT_EQ(r.token, (Vec{3}));
    EXPECT_EQ(r.size, 4u);

    const std::vector<Vec> c = {{1.5f, -2}};
    r = merge_weighted_average<float>(testing::spans_of(c), std::vector<std::uint32_t>{5});
    EXPECT_EQ(r.token, c[0]);
    EXPECT_EQ(r.size, 5u);
}

TEST(WeightedAverage, UnitSizesGiveMean)
{
    std::mt19937 rng(37);
    std::normal_distribution<float> n(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t members = 1 + rng() % 4, d = 1 + rng() % 16;
        std::vector<Vec> g(members, Vec(d));
        for (auto& m : g)
            for (auto& x : m) x = n(rng);
        auto r = merge_weighted_average<float>(testing::spans_of(g),
                                               std::vector<std::uint32_t>(members, 1));
        for (std::size_t i = 0; i < d; ++i) {
            double mean = 0;
            for (const auto& m : g) mean += m[i];
            EXPECT_NEAR(r.token[i], mean / members, 1e-6);
        }
        auto again = merge_weighted_average<float>(
            testing::spans_of(std::vector<Vec>{r.token, r.token}), std::vector<std::uint32_t>{1, 1});
        EXPECT_EQ(again.token, r.token);
    }
}

TEST(WeightedAverage, Errors)
{
    const std::vector<Vec> a = {{2}, {4, 1}};
    EXPECT_THROW(merge_weighted_average<float>(testing::spans_of(a),
                                               std::vector<std::uint32_t>{1, 1}),
                 dimension_mismatch_error);
    const std::vector<Vec> b = {{2}, {4}};
    EXPECT_THROW(merge_weighted_average<float>(testing::spans_of(b), std::vector<std::uint32_t>{1}),
                 dimension_mismatch_error);
}

TEST(MaxVector, Examples)
{
    EXPECT_EQ(max_vector({{1, 1}, {3, 0}}), (Vec{3, 0}));
    EXPECT_EQ(max_vector({{4, -1}}), (Vec{4, -1}));
    EXPECT_EQ(max_vector({{1, -1}, {-1, 1}}), (Vec{1, -1}));
    EXPECT_THROW(max_vector({{1}, {1, 2}}), dimension_mismatch_error);
}

TEST(MaxVector, SelectsAnInput)
{
    std::mt19937 rng(41);
    std::normal_distribution<float> n(0, 1);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<Vec> g(1 + rng() % 5, Vec(1 + rng() % 8));
        for (auto& m : g)
            for (auto& x : m) x = n(rng);
        const auto out = max_vector(g);
        EXPECT_NE(std::find(g.begin(), g.end(), out), g.end());
        EXPECT_EQ(max_vector({out, out}), out);
    }
}

TEST(MergeGroup, Overloads)
{
    Vec a{1, -3}, b{-2, 1};
    MergeGroup<float> g{{a, b}, {1, 3}};
    EXPECT_EQ(merge_max_per_dim(g), (Vec{-2, -3}));
    EXPECT_EQ(merge_max_vector(g), a);
    EXPECT_EQ(merge_weighted_average(g).size, 4u);
}

} // namespace
} // namespace cubist
