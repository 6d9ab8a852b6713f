#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <map>
#include <random>

#include "cubist/pipeline.hpp"
#include "test_util.hpp"

namespace cubist {
namespace {

ReductionSpec make_spec(std::uint32_t rh, std::uint32_t rw, std::optional<std::uint32_t> window = {},
                        Strategy s = Strategy::bipartite_local,
                        Representation m = Representation::max_per_dim)
{
    ReductionSpec spec;
    spec.rate_h = Rate::count(rh);
    spec.rate_w = Rate::count(rw);
    spec.window = window;
    spec.strategy = s;
    spec.representation = m;
    return spec;
}

TEST(ReduceHorizontal, FourteenToTwelve)
{
    std::mt19937 rng(1);
    auto g = testing::random_grid(rng, 14, 14, 8);
    auto h = reduce_horizontal(g, 2, Strategy::bipartite_local, Representation::max_per_dim);
    EXPECT_EQ(h.grid.height(), 14u);
    EXPECT_EQ(h.grid.width(), 12u);
    auto v = reduce_vertical(h.grid, 2, Strategy::bipartite_local, Representation::max_per_dim);
    EXPECT_EQ(v.grid.height(), 12u);
    EXPECT_EQ(v.grid.width(), 12u);
}

TEST(ReduceHorizontal, ZeroRateIsIdentity)
{
    std::mt19937 rng(2);
    auto g = testing::random_grid(rng, 5, 7, 3);
    for (auto s : {Strategy::bipartite_local, Strategy::naive_local}) {
        for (auto m : all_representations) {
            auto h = reduce_horizontal(g, 0, s, m);
            EXPECT_EQ(h.grid, g);
            EXPECT_TRUE(h.map.is_identity());
            auto v = reduce_vertical(g, 0, s, m);
            EXPECT_EQ(v.grid, g);
            EXPECT_TRUE(v.map.is_identity());
        }
    }
}

TEST(ReduceHorizontal, AABBRow)
{
    // roles [d s d s]; source 1 (a) -> 0 at 1.0, source 3 (b) -> 2 at 1.0; tie -> source 1.
    TokenGrid g(1, 4, 2, {1, 0, 1, 0, 0, 1, 0, 1});
    auto h = reduce_horizontal(g, 1, Strategy::bipartite_local, Representation::max_per_dim);
    EXPECT_EQ(h.grid, TokenGrid(1, 3, 2, {1, 0, 0, 1, 0, 1}));
    EXPECT_EQ(h.map.targets(), (std::vector<std::uint32_t>{0, 0, 1, 2}));
    ASSERT_EQ(h.edges[0].size(), 1u);
    EXPECT_EQ(h.edges[0][0], (Edge{1, 0, 1.0}));
}

TEST(ReduceHorizontal, InfeasibleRates)
{
    TokenGrid g(3, 6, 2);
    // bipartite can remove at most floor(6/2) = 3 per row
    EXPECT_THROW(reduce_horizontal(g, 4, Strategy::bipartite_local, Representation::max_per_dim),
                 infeasible_rate_error);
    EXPECT_NO_THROW(reduce_horizontal(g, 5, Strategy::naive_local, Representation::max_per_dim));
    EXPECT_THROW(reduce_horizontal(g, 6, Strategy::naive_local, Representation::max_per_dim),
                 invalid_spec_error);
    EXPECT_THROW(reduce_vertical(g, 2, Strategy::bipartite_local, Representation::max_per_dim),
                 infeasible_rate_error);
}

TEST(ReduceVertical, TransposeEquivalence)
{
    std::mt19937 rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t h = 2 + rng() % 10, w = 1 + rng() % 10;
        auto g = testing::random_grid(rng, h, w, 1 + rng() % 6);
        const std::uint32_t r = rng() % (h / 2 + 1);
        for (auto s : {Strategy::bipartite_local, Strategy::naive_local}) {
            for (auto m : all_representations) {
                auto v = reduce_vertical(g, r, s, m);
                auto t = reduce_horizontal(transpose(g), r, s, m);
                EXPECT_EQ(v.grid, transpose(t.grid));
                EXPECT_EQ(v.edges, t.edges);
                for (std::size_t row = 0; row < h; ++row)
                    for (std::size_t col = 0; col < w; ++col) {
                        auto a = v.map(row, col);
                        auto b = t.map(col, row);
                        EXPECT_EQ(a.row, b.col);
                        EXPECT_EQ(a.col, b.row);
                    }
            }
        }
    }
}

TEST(CubistReduce, Fig2Shapes)
{
    std::mt19937 rng(4);
    auto g = testing::random_grid(rng, 14, 14, 16);
    auto red = cubist_reduce(g, make_spec(2, 2));
    EXPECT_EQ(red.tokens.height(), 12u);
    EXPECT_EQ(red.tokens.width(), 12u);
    EXPECT_EQ(red.map.new_height(), 12u);
    EXPECT_FALSE(red.sizes.has_value());
}

TEST(CubistReduce, WindowedSixteen)
{
    std::mt19937 rng(5);
    auto g = testing::random_grid(rng, 16, 16, 4);
    auto red = cubist_reduce(g, make_spec(2, 2, 8));
    EXPECT_EQ(red.tokens.height(), 12u);
    EXPECT_EQ(red.tokens.width(), 12u);
    // each 8x8 window maps into its own 6x6 block
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 16; ++c) {
            auto p = red.map(r, c);
            EXPECT_EQ(p.row / 6, r / 8);
            EXPECT_EQ(p.col / 6, c / 8);
        }
    EXPECT_THROW(cubist_reduce(testing::random_grid(rng, 14, 14, 2), make_spec(2, 2, 8)),
                 invalid_spec_error);
}

TEST(CubistReduce, FractionalRatesPerWindow)
{
    std::mt19937 rng(6);
    auto g = testing::random_grid(rng, 20, 20, 4);
    ReductionSpec spec = make_spec(0, 0, 10);
    spec.rate_h = Rate::fraction(0.25); // floor(2.5) = 2 per window
    spec.rate_w = Rate::fraction(0.35); // floor(3.5) = 3 per window
    auto red = cubist_reduce(g, spec);
    EXPECT_EQ(red.rates, (ResolvedRates{2, 3}));
    EXPECT_EQ(red.tokens.height(), 16u);
    EXPECT_EQ(red.tokens.width(), 14u);
}

TEST(CubistReduce, IdenticalTokensStayIdentical)
{
    std::vector<float> v;
    const std::vector<float> t = {0.5f, -2.0f, 1.0f};
    for (int i = 0; i < 8 * 8; ++i) v.insert(v.end(), t.begin(), t.end());
    TokenGrid g(8, 8, 3, v);
    for (auto s : all_strategies) {
        for (auto m : all_representations) {
            auto red = cubist_reduce(g, make_spec(2, 2, std::nullopt, s, m));
            for (std::size_t i = 0; i < red.tokens.token_count(); ++i) {
                auto tok = red.tokens.token(i);
                EXPECT_TRUE(std::equal(tok.begin(), tok.end(), t.begin()));
            }
        }
    }
}

TEST(CubistReduce, ShapeLawAndSizesRandomized)
{
    std::mt19937 rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        const bool windowed = rng() % 2;
        const std::uint32_t w = 2 + rng() % 7;
        const std::size_t H = windowed ? w * (1 + rng() % 3) : 2 + rng() % 14;
        const std::size_t W = windowed ? w * (1 + rng() % 3) : 2 + rng() % 14;
        const std::size_t rh_ext = windowed ? w : H, rw_ext = windowed ? w : W;
        const auto strategy = all_strategies[rng() % 2];
        const auto repr = all_representations[rng() % 3];
        const std::size_t cap_h = strategy == Strategy::bipartite_local ? rh_ext / 2 : rh_ext - 1;
        const std::size_t cap_w = strategy == Strategy::bipartite_local ? rw_ext / 2 : rw_ext - 1;
        const std::uint32_t rh = rng() % (cap_h + 1), rw = rng() % (cap_w + 1);
        auto g = testing::random_grid(rng, H, W, 1 + rng() % 8);
        auto red = cubist_reduce(g, make_spec(rh, rw, windowed ? std::optional(w) : std::nullopt,
                                              strategy, repr));
        const std::size_t nwr = H / rh_ext, nwc = W / rw_ext;
        EXPECT_EQ(red.tokens.height(), nwr * (rh_ext - rh));
        EXPECT_EQ(red.tokens.width(), nwc * (rw_ext - rw));
        EXPECT_TRUE(red.structured);
        const auto counts = red.map.preimage_counts();
        EXPECT_EQ(std::accumulate(counts.begin(), counts.end(), std::size_t{0}), H * W);
        if (strategy == Strategy::bipartite_local) {
            for (auto c : counts) EXPECT_LE(c, 9u);
        }
        if (repr == Representation::weighted_average) {
            ASSERT_TRUE(red.sizes.has_value());
            EXPECT_EQ(red.sizes->total(), H * W);
            for (std::size_t i = 0; i < counts.size(); ++i) EXPECT_EQ(red.sizes->values()[i], counts[i]);
        } else {
            EXPECT_FALSE(red.sizes.has_value());
        }
    }
}

TEST(CubistReduce, GlobalBaselineIsFlat)
{
    std::mt19937 rng(8);
    auto g = testing::random_grid(rng, 14, 14, 4);
    auto red = cubist_reduce(g, make_spec(2, 2, std::nullopt, Strategy::bipartite_global));
    EXPECT_FALSE(red.structured);
    EXPECT_EQ(red.tokens.height(), 1u);
    EXPECT_EQ(red.tokens.width(), 144u);
    ASSERT_EQ(red.phases.size(), 1u);
    EXPECT_EQ(red.phases[0].axis, Axis::flat);
    EXPECT_EQ(red.merged_edges(), 52u);

    auto win = cubist_reduce(testing::random_grid(rng, 16, 16, 4),
                             make_spec(2, 2, 8, Strategy::bipartite_global));
    EXPECT_EQ(win.tokens.height(), 1u);
    EXPECT_EQ(win.tokens.width(), 4u * 36u);
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t c = 0; c < 16; ++c)
            EXPECT_EQ(win.map(r, c).col / 36, (r / 8) * 2 + c / 8);
}

TEST(CubistReduce, DeterministicAcrossThreadCounts)
{
    std::mt19937 rng(9);
    auto g = testing::random_grid(rng, 24, 24, 16);
    for (auto s : {Strategy::bipartite_local, Strategy::naive_local}) {
        auto a = cubist_reduce(g, make_spec(5, 4, std::nullopt, s), {1});
        auto b = cubist_reduce(g, make_spec(5, 4, std::nullopt, s), {4});
        EXPECT_EQ(a.tokens, b.tokens);
        EXPECT_EQ(a.map, b.map);
        ASSERT_EQ(a.phases.size(), b.phases.size());
        for (std::size_t i = 0; i < a.phases.size(); ++i) EXPECT_EQ(a.phases[i].edges, b.phases[i].edges);
    }
}

TEST(CubistReduce, SeparateFeaturesDriveMatching)
{
    // Tokens are all distinct but the features say columns 2 and 3 are identical.
    std::mt19937 rng(10);
    auto g = testing::random_grid(rng, 1, 4, 3);
    TokenGrid f(1, 4, 2, {1, 0, 0, 1, 1, 1, 1, 1});
    ReduceOptions opt;
    opt.features = &f;
    auto h = reduce_horizontal(g, 1, Strategy::bipartite_local, Representation::max_vector, opt);
    ASSERT_EQ(h.edges[0].size(), 1u);
    EXPECT_EQ(h.edges[0][0].src, 3u);
    EXPECT_EQ(h.edges[0][0].dst, 2u);
    ASSERT_TRUE(h.features.has_value());
    EXPECT_EQ(h.features->width(), 3u);
}

TEST(Unmerge, ZeroRateIdentity)
{
    std::mt19937 rng(11);
    auto g = testing::random_grid(rng, 6, 9, 5);
    auto red = cubist_reduce(g, make_spec(0, 0));
    EXPECT_EQ(unmerge(red), g);
}

TEST(Unmerge, BroadcastsMergedPair)
{
    TokenGrid g(1, 4, 2, {1, 0, 3, 0, 0, 1, 0, 1});
    auto red = cubist_reduce(g, make_spec(0, 1));
    auto dense = unmerge(red);
    // {(0,0), (0,1)} merged by max-per-dim into (3, 0)
    EXPECT_EQ(dense.token(0, 0)[0], 3.0f);
    EXPECT_EQ(dense.token(0, 1)[0], 3.0f);
    EXPECT_EQ(dense.token(0, 2)[1], 1.0f);
}

// Rebuild merge groups from the recorded edge lists with a union-find over
// original positions, without using the library's group resolution or maps.
struct ReplayGroups {
    std::vector<std::size_t> parent;
    std::size_t find(std::size_t x)
    {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

ReplayGroups replay(const ReducedGrid& red, std::size_t H, std::size_t W)
{
    ReplayGroups u{std::vector<std::size_t>(H * W)};
    std::iota(u.parent.begin(), u.parent.end(), 0);
    const auto& hph = red.phases.at(0);
    const auto& vph = red.phases.at(1);
    std::vector<std::vector<std::size_t>> survivors(H);
    for (std::size_t r = 0; r < H; ++r) {
        std::vector<bool> gone(W, false);
        for (const auto& e : hph.edges[r]) {
            u.unite(r * W + e.src, r * W + e.dst);
            gone[e.src] = true;
        }
        for (std::size_t c = 0; c < W; ++c)
            if (!gone[c]) survivors[r].push_back(c);
    }
    for (std::size_t c = 0; c < vph.edges.size(); ++c) {
        for (const auto& e : vph.edges[c]) {
            u.unite(e.src * W + survivors[e.src][c], e.dst * W + survivors[e.dst][c]);
        }
    }
    return u;
}

TEST(Unmerge, MatchesEdgeReplayOracle)
{
    std::mt19937 rng(12);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t H = 2 + rng() % 12, W = 2 + rng() % 12, d = 1 + rng() % 8;
        const auto strategy = trial % 2 ? Strategy::naive_local : Strategy::bipartite_local;
        const std::size_t ch = strategy == Strategy::bipartite_local ? H / 2 : H - 1;
        const std::size_t cw = strategy == Strategy::bipartite_local ? W / 2 : W - 1;
        auto g = testing::random_grid(rng, H, W, d);
        auto red = cubist_reduce(g, make_spec(rng() % (ch + 1), rng() % (cw + 1), std::nullopt,
                                              strategy, Representation::max_per_dim));
        auto dense = unmerge(red);
        auto groups = replay(red, H, W);

        std::map<std::size_t, std::vector<std::size_t>> members;
        for (std::size_t p = 0; p < H * W; ++p) members[groups.find(p)].push_back(p);
        EXPECT_EQ(members.size(), red.tokens.token_count());
        for (const auto& [root, ps] : members) {
            // Expected representative: max-magnitude entry over all original members.
            for (std::size_t i = 0; i < d; ++i) {
                float best = g.token(ps[0])[i];
                for (auto p : ps)
                    if (std::fabs(g.token(p)[i]) > std::fabs(best)) best = g.token(p)[i];
                for (auto p : ps) ASSERT_EQ(dense.token(p)[i], best);
            }
            for (auto p : ps) EXPECT_EQ(red.map.target(p), red.map.target(ps[0]));
        }
    }
}

TEST(ComposeMaps, IdentityLaws)
{
    std::mt19937 rng(13);
    auto g = testing::random_grid(rng, 8, 10, 3);
    auto red = cubist_reduce(g, make_spec(3, 4));
    EXPECT_EQ(compose_maps(MergeMap::identity(8, 10), red.map), red.map);
    EXPECT_EQ(compose_maps(red.map, MergeMap::identity(5, 6)), red.map);
    EXPECT_THROW(compose_maps(red.map, MergeMap::identity(8, 10)), invalid_spec_error);
}

TEST(ComposeMaps, PreimageBoundIsProductOfPhases)
{
    std::mt19937 rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t H = 2 + rng() % 8, W = 2 + rng() % 8;
        auto g = testing::random_grid(rng, H, W, 3);
        auto h = reduce_horizontal(g, rng() % (W / 2 + 1), Strategy::bipartite_local,
                                   Representation::max_per_dim);
        auto v = reduce_vertical(h.grid, rng() % (H / 2 + 1), Strategy::bipartite_local,
                                 Representation::max_per_dim);
        auto m = compose_maps(h.map, v.map);
        // brute force: count preimages directly and bound by per-phase maxima
        const auto ph = h.map.preimage_counts(), pv = v.map.preimage_counts();
        const auto mh = *std::max_element(ph.begin(), ph.end());
        const auto mv = *std::max_element(pv.begin(), pv.end());
        EXPECT_LE(mh, 3u);
        EXPECT_LE(mv, 3u);
        std::vector<std::uint32_t> direct(m.new_height() * m.new_width(), 0);
        for (std::size_t p = 0; p < H * W; ++p) ++direct[v.map.target(h.map.target(p))];
        EXPECT_EQ(direct, m.preimage_counts());
        for (auto c : direct) {
            EXPECT_GE(c, 1u);
            EXPECT_LE(c, mh * mv);
            EXPECT_LE(c, 9u);
        }
    }
}

TEST(MergeMap, OrderPreservationPerPhase)
{
    std::mt19937 rng(15);
    for (int trial = 0; trial < 100; ++trial) {
        auto g = testing::random_grid(rng, 10, 12, 4);
        for (auto s : {Strategy::bipartite_local, Strategy::naive_local}) {
            auto red = cubist_reduce(g, make_spec(rng() % 5, rng() % 6, std::nullopt, s));
            EXPECT_TRUE(columns_monotone_within_rows(red.phases[0].map));
            EXPECT_TRUE(rows_monotone_within_columns(red.phases[0].map));
            EXPECT_TRUE(columns_monotone_within_rows(red.phases[1].map));
            EXPECT_TRUE(rows_monotone_within_columns(red.phases[1].map));
            EXPECT_TRUE(columns_monotone_within_rows(red.map));
        }
    }
}

TEST(MergeMap, CsvFormat)
{
    TokenGrid g(1, 4, 2, {1, 0, 1, 0, 0, 1, 0, 1});
    auto red = cubist_reduce(g, make_spec(0, 1));
    EXPECT_EQ(to_csv(red.map),
              "orig_row,orig_col,new_row,new_col\n0,0,0,0\n0,1,0,0\n0,2,0,1\n0,3,0,2\n");
}

TEST(MergeMap, RejectsNonSurjective)
{
    EXPECT_THROW(MergeMap(1, 2, 1, 2, {0, 0}), invalid_spec_error);
    EXPECT_THROW(MergeMap(1, 2, 1, 1, {0}), invalid_spec_error);
}

} // namespace
} // namespace cubist
