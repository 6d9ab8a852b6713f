#pragma once

// Seeded synthetic feature maps for exercising the reducer.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cubist/error.hpp"
#include "cubist/grid.hpp"

namespace cubist {

enum class Pattern { uniform, blobs, stripes };

inline std::string_view to_string(Pattern p) noexcept
{
    switch (p) {
    case Pattern::uniform: return "uniform";
    case Pattern::blobs: return "blobs";
    case Pattern::stripes: return "stripes";
    }
    return "?";
}

inline Pattern parse_pattern(std::string_view s)
{
    for (auto p : {Pattern::uniform, Pattern::blobs, Pattern::stripes}) {
        if (to_string(p) == s) return p;
    }
    throw invalid_spec_error("unknown pattern '" + std::string(s) + "'");
}

struct SyntheticGrid {
    TokenGrid grid;
    /// Row-major; true inside a blob. All false for other patterns.
    std::vector<bool> blob_mask;

    double blob_fraction() const
    {
        const auto n = std::count(blob_mask.begin(), blob_mask.end(), true);
        return static_cast<double>(n) / static_cast<double>(blob_mask.size());
    }
};

/// uniform: one random vector everywhere.
/// blobs: square patches of i.i.d. noise over a near-constant background,
///   covering roughly 15% of the grid.
/// stripes: vertical bands of near-constant vectors.
inline SyntheticGrid generate_grid(std::size_t height, std::size_t width, std::size_t dim,
                                   Pattern pattern, std::uint64_t seed)
{
    SyntheticGrid out{TokenGrid(height, width, dim), std::vector<bool>(height * width, false)};
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> normal(0.0f, 1.0f);
    auto random_vector = [&] {
        std::vector<float> v(dim);
        for (auto& x : v) x = normal(rng);
        return v;
    };
    constexpr float background_noise = 0.05f;

    switch (pattern) {
    case Pattern::uniform: {
        const auto v = random_vector();
        for (std::size_t n = 0; n < height * width; ++n) {
            std::copy(v.begin(), v.end(), out.grid.token(n).begin());
        }
        break;
    }
    case Pattern::blobs: {
        const auto base = random_vector();
        for (std::size_t n = 0; n < height * width; ++n) {
            auto t = out.grid.token(n);
            for (std::size_t i = 0; i < dim; ++i) t[i] = base[i] + background_noise * normal(rng);
        }
        const std::size_t side = std::max<std::size_t>(1, std::min(height, width) / 6);
        const double target = 0.15 * static_cast<double>(height * width);
        const auto count = std::max<std::size_t>(
            1, static_cast<std::size_t>(target / static_cast<double>(side * side) + 0.5));
        std::uniform_int_distribution<std::size_t> row0(0, height - side);
        std::uniform_int_distribution<std::size_t> col0(0, width - side);
        for (std::size_t b = 0; b < count; ++b) {
            const std::size_t r0 = row0(rng);
            const std::size_t c0 = col0(rng);
            for (std::size_t r = r0; r < r0 + side; ++r) {
                for (std::size_t c = c0; c < c0 + side; ++c) {
                    out.blob_mask[r * width + c] = true;
                }
            }
        }
        for (std::size_t n = 0; n < height * width; ++n) {
            if (!out.blob_mask[n]) continue;
            for (auto& x : out.grid.token(n)) x = 2.0f * normal(rng);
        }
        break;
    }
    case Pattern::stripes: {
        const std::size_t band = std::max<std::size_t>(1, width / 8);
        std::vector<std::vector<float>> colours;
        for (std::size_t c = 0; c < width; c += band) colours.push_back(random_vector());
        for (std::size_t r = 0; r < height; ++r) {
            for (std::size_t c = 0; c < width; ++c) {
                const auto& v = colours[c / band];
                auto t = out.grid.token(r, c);
                for (std::size_t i = 0; i < dim; ++i) t[i] = v[i] + background_noise * normal(rng);
            }
        }
        break;
    }
    }
    return out;
}

} // namespace cubist
