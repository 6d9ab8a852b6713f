#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "cubist/error.hpp"

namespace cubist {

/// Dense H x W x d feature map, row-major over (row, column, channel).
///
/// Every scalar is finite. The checked constructor rejects NaN and Inf so
/// that similarity and argmax stay total inside the library.
class TokenGrid {
public:
    /// Zero-filled grid.
    TokenGrid(std::size_t height, std::size_t width, std::size_t dim)
        : height_(height), width_(width), dim_(dim), data_(height * width * dim, 0.0f)
    {
        check_shape();
    }

    TokenGrid(std::size_t height, std::size_t width, std::size_t dim, std::vector<float> data)
        : height_(height), width_(width), dim_(dim), data_(std::move(data))
    {
        check_shape();
        if (data_.size() != height_ * width_ * dim_) {
            throw invalid_spec_error("token grid data length " + std::to_string(data_.size()) +
                                     " does not equal H*W*d = " +
                                     std::to_string(height_ * width_ * dim_));
        }
        for (float v : data_) {
            if (!std::isfinite(v)) {
                throw invalid_spec_error("token grid contains a non-finite value");
            }
        }
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t dim() const noexcept { return dim_; }
    std::size_t token_count() const noexcept { return height_ * width_; }

    std::span<const float> data() const noexcept { return data_; }
    std::span<float> data() noexcept { return data_; }

    std::span<const float> token(std::size_t row, std::size_t col) const noexcept
    {
        return {data_.data() + (row * width_ + col) * dim_, dim_};
    }
    std::span<float> token(std::size_t row, std::size_t col) noexcept
    {
        return {data_.data() + (row * width_ + col) * dim_, dim_};
    }
    std::span<const float> token(std::size_t flat) const noexcept
    {
        return {data_.data() + flat * dim_, dim_};
    }
    std::span<float> token(std::size_t flat) noexcept
    {
        return {data_.data() + flat * dim_, dim_};
    }

    friend bool operator==(const TokenGrid&, const TokenGrid&) = default;

private:
    void check_shape() const
    {
        if (height_ == 0 || width_ == 0 || dim_ == 0) {
            throw invalid_spec_error("token grid dimensions must be positive");
        }
    }

    std::size_t height_;
    std::size_t width_;
    std::size_t dim_;
    std::vector<float> data_;
};

/// Per-position count of original tokens represented. Same layout as its grid.
class TokenSizeGrid {
public:
    TokenSizeGrid(std::size_t height, std::size_t width)
        : height_(height), width_(width), sizes_(height * width, 1u)
    {
    }

    TokenSizeGrid(std::size_t height, std::size_t width, std::vector<std::uint32_t> sizes)
        : height_(height), width_(width), sizes_(std::move(sizes))
    {
        if (sizes_.size() != height_ * width_) {
            throw invalid_spec_error("size grid length does not equal H*W");
        }
        for (auto s : sizes_) {
            if (s == 0) {
                throw invalid_spec_error("token sizes must be >= 1");
            }
        }
    }

    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::uint32_t at(std::size_t row, std::size_t col) const noexcept
    {
        return sizes_[row * width_ + col];
    }
    std::uint32_t& at(std::size_t row, std::size_t col) noexcept
    {
        return sizes_[row * width_ + col];
    }
    std::span<const std::uint32_t> values() const noexcept { return sizes_; }
    std::uint64_t total() const noexcept
    {
        return std::accumulate(sizes_.begin(), sizes_.end(), std::uint64_t{0});
    }

    friend bool operator==(const TokenSizeGrid&, const TokenSizeGrid&) = default;

private:
    std::size_t height_;
    std::size_t width_;
    std::vector<std::uint32_t> sizes_;
};

enum class Strategy { bipartite_local, naive_local, bipartite_global };
enum class Representation { max_per_dim, weighted_average, max_vector };

inline constexpr Strategy all_strategies[] = {Strategy::bipartite_local, Strategy::naive_local,
                                              Strategy::bipartite_global};
inline constexpr Representation all_representations[] = {
    Representation::max_per_dim, Representation::weighted_average, Representation::max_vector};

inline std::string_view to_string(Strategy s) noexcept
{
    switch (s) {
    case Strategy::bipartite_local: return "bipartite_local";
    case Strategy::naive_local: return "naive_local";
    case Strategy::bipartite_global: return "bipartite_global";
    }
    return "?";
}

inline std::string_view to_string(Representation r) noexcept
{
    switch (r) {
    case Representation::max_per_dim: return "max_per_dim";
    case Representation::weighted_average: return "weighted_average";
    case Representation::max_vector: return "max_vector";
    }
    return "?";
}

inline Strategy parse_strategy(std::string_view s)
{
    for (auto v : all_strategies) {
        if (to_string(v) == s) return v;
    }
    throw invalid_spec_error("unknown strategy '" + std::string(s) + "'");
}

inline Representation parse_representation(std::string_view s)
{
    for (auto v : all_representations) {
        if (to_string(v) == s) return v;
    }
    throw invalid_spec_error("unknown representation '" + std::string(s) + "'");
}

/// Reduction rate along one axis: either an absolute count of tokens removed
/// from every line, or a fraction of the region extent.
class Rate {
public:
    constexpr Rate() = default;

    static constexpr Rate count(std::uint32_t m) { return Rate(m); }

    static Rate fraction(double a)
    {
        if (!(a >= 0.0 && a < 1.0)) {
            throw invalid_spec_error("fractional rate must lie in [0, 1), got " +
                                     std::to_string(a));
        }
        return Rate(a);
    }

    /// "3" is a count, "0.25" a fraction.
    static Rate parse(std::string_view text)
    {
        std::string s(text);
        try {
            std::size_t used = 0;
            if (s.find_first_of(".eE") != std::string::npos) {
                double a = std::stod(s, &used);
                if (used == s.size()) return fraction(a);
            } else {
                long long m = std::stoll(s, &used);
                if (used == s.size() && m >= 0 && m <= 0xffffffffLL) {
                    return count(static_cast<std::uint32_t>(m));
                }
            }
        } catch (const std::logic_error&) {
        }
        throw invalid_spec_error("cannot parse rate '" + s + "'");
    }

    bool is_fraction() const noexcept { return std::holds_alternative<double>(value_); }

    /// Tokens removed from a line of the given extent. Fractions use floor(a * extent).
    std::uint32_t resolve(std::size_t extent) const noexcept
    {
        if (auto m = std::get_if<std::uint32_t>(&value_)) return *m;
        return static_cast<std::uint32_t>(std::floor(std::get<double>(value_) *
                                                     static_cast<double>(extent)));
    }

    std::string str() const
    {
        if (auto m = std::get_if<std::uint32_t>(&value_)) return std::to_string(*m);
        return std::to_string(std::get<double>(value_));
    }

    friend bool operator==(const Rate&, const Rate&) = default;

private:
    constexpr explicit Rate(std::uint32_t m) : value_(m) {}
    constexpr explicit Rate(double a) : value_(a) {}

    std::variant<std::uint32_t, double> value_{std::uint32_t{0}};
};

struct ReductionSpec {
    std::uint32_t layer = 0;
    Rate rate_h;
    Rate rate_w;
    std::optional<std::uint32_t> window;
    Strategy strategy = Strategy::bipartite_local;
    Representation representation = Representation::max_per_dim;
};

struct ResolvedRates {
    std::uint32_t r_h = 0;
    std::uint32_t r_w = 0;
    friend bool operator==(const ResolvedRates&, const ResolvedRates&) = default;
};

/// Resolve the spec's rates against one reduction region (a window, or the whole grid).
inline ResolvedRates resolve_rates(const ReductionSpec& spec, std::size_t region_h,
                                   std::size_t region_w)
{
    if (region_h == 0 || region_w == 0) {
        throw invalid_spec_error("region dimensions must be positive");
    }
    ResolvedRates r{spec.rate_h.resolve(region_h), spec.rate_w.resolve(region_w)};
    if (r.r_h >= region_h) {
        throw invalid_spec_error("r_h = " + std::to_string(r.r_h) +
                                 " must be < region height " + std::to_string(region_h));
    }
    if (r.r_w >= region_w) {
        throw invalid_spec_error("r_w = " + std::to_string(r.r_w) +
                                 " must be < region width " + std::to_string(region_w));
    }
    return r;
}

/// Side lengths of the region each reduction runs on.
inline std::pair<std::size_t, std::size_t> region_extent(const ReductionSpec& spec,
                                                         std::size_t height, std::size_t width)
{
    if (!spec.window) return {height, width};
    const std::size_t w = *spec.window;
    if (w == 0) throw invalid_spec_error("window must be positive");
    if (height % w != 0 || width % w != 0) {
        throw invalid_spec_error("grid " + std::to_string(height) + "x" + std::to_string(width) +
                                 " is not divisible by window " + std::to_string(w));
    }
    return {w, w};
}

/// Split into (H/window)*(W/window) window grids, row-major over window indices.
inline std::vector<TokenGrid> window_partition(const TokenGrid& grid, std::size_t window)
{
    if (window == 0 || grid.height() % window != 0 || grid.width() % window != 0) {
        throw invalid_spec_error("grid " + std::to_string(grid.height()) + "x" +
                                 std::to_string(grid.width()) + " is not divisible by window " +
                                 std::to_string(window));
    }
    const std::size_t wr = grid.height() / window;
    const std::size_t wc = grid.width() / window;
    const std::size_t d = grid.dim();
    std::vector<TokenGrid> out;
    out.reserve(wr * wc);
    for (std::size_t i = 0; i < wr; ++i) {
        for (std::size_t j = 0; j < wc; ++j) {
            TokenGrid w(window, window, d);
            for (std::size_t r = 0; r < window; ++r) {
                auto src = grid.data().subspan(((i * window + r) * grid.width() + j * window) * d,
                                               window * d);
                std::copy(src.begin(), src.end(), w.data().begin() + r * window * d);
            }
            out.push_back(std::move(w));
        }
    }
    return out;
}

/// Inverse of window_partition. Windows may be rectangular but must share one shape.
inline TokenGrid window_unpartition(std::span<const TokenGrid> windows, std::size_t window_rows,
                                    std::size_t window_cols)
{
    if (windows.size() != window_rows * window_cols || windows.empty()) {
        throw invalid_spec_error("window count does not match the window layout");
    }
    const std::size_t h = windows.front().height();
    const std::size_t w = windows.front().width();
    const std::size_t d = windows.front().dim();
    for (const auto& win : windows) {
        if (win.height() != h || win.width() != w || win.dim() != d) {
            throw invalid_spec_error("windows do not share one shape");
        }
    }
    TokenGrid out(window_rows * h, window_cols * w, d);
    for (std::size_t i = 0; i < window_rows; ++i) {
        for (std::size_t j = 0; j < window_cols; ++j) {
            const auto& win = windows[i * window_cols + j];
            for (std::size_t r = 0; r < h; ++r) {
                auto src = win.data().subspan(r * w * d, w * d);
                std::copy(src.begin(), src.end(),
                          out.data().begin() + ((i * h + r) * out.width() + j * w) * d);
            }
        }
    }
    return out;
}

inline TokenGrid transpose(const TokenGrid& grid)
{
    TokenGrid out(grid.width(), grid.height(), grid.dim());
    for (std::size_t r = 0; r < grid.height(); ++r) {
        for (std::size_t c = 0; c < grid.width(); ++c) {
            auto src = grid.token(r, c);
            std::copy(src.begin(), src.end(), out.token(c, r).begin());
        }
    }
    return out;
}

} // namespace cubist
