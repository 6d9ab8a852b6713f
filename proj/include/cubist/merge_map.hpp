#pragma once

#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "cubist/error.hpp"

namespace cubist {

struct GridPos {
    std::uint32_t row = 0;
    std::uint32_t col = 0;
    friend bool operator==(const GridPos&, const GridPos&) = default;
};

/// Total map from every original grid position to the reduced position that
/// represents it. Surjective onto the reduced grid.
class MergeMap {
public:
    MergeMap(std::size_t orig_h, std::size_t orig_w, std::size_t new_h, std::size_t new_w,
             std::vector<std::uint32_t> targets)
        : orig_h_(orig_h), orig_w_(orig_w), new_h_(new_h), new_w_(new_w),
          targets_(std::move(targets))
    {
        if (targets_.size() != orig_h_ * orig_w_) {
            throw invalid_spec_error("merge map must cover every original position");
        }
        std::vector<bool> hit(new_h_ * new_w_, false);
        for (auto t : targets_) {
            if (t >= hit.size()) throw invalid_spec_error("merge map target outside reduced grid");
            hit[t] = true;
        }
        for (bool h : hit) {
            if (!h) throw invalid_spec_error("merge map is not surjective onto the reduced grid");
        }
    }

    static MergeMap identity(std::size_t h, std::size_t w)
    {
        std::vector<std::uint32_t> t(h * w);
        for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<std::uint32_t>(i);
        return MergeMap(h, w, h, w, std::move(t));
    }

    std::size_t orig_height() const noexcept { return orig_h_; }
    std::size_t orig_width() const noexcept { return orig_w_; }
    std::size_t new_height() const noexcept { return new_h_; }
    std::size_t new_width() const noexcept { return new_w_; }

    /// Flat reduced index for a flat original index.
    std::uint32_t target(std::size_t flat) const noexcept { return targets_[flat]; }
    const std::vector<std::uint32_t>& targets() const noexcept { return targets_; }

    GridPos operator()(std::size_t row, std::size_t col) const noexcept
    {
        const auto t = targets_[row * orig_w_ + col];
        return {static_cast<std::uint32_t>(t / new_w_), static_cast<std::uint32_t>(t % new_w_)};
    }

    bool is_identity() const noexcept
    {
        if (orig_h_ != new_h_ || orig_w_ != new_w_) return false;
        for (std::size_t i = 0; i < targets_.size(); ++i) {
            if (targets_[i] != i) return false;
        }
        return true;
    }

    /// Number of original positions landing on each reduced position.
    std::vector<std::uint32_t> preimage_counts() const
    {
        std::vector<std::uint32_t> counts(new_h_ * new_w_, 0);
        for (auto t : targets_) ++counts[t];
        return counts;
    }

    friend bool operator==(const MergeMap&, const MergeMap&) = default;

private:
    std::size_t orig_h_;
    std::size_t orig_w_;
    std::size_t new_h_;
    std::size_t new_w_;
    std::vector<std::uint32_t> targets_;
};

/// Apply `first`, then `second`.
inline MergeMap compose_maps(const MergeMap& first, const MergeMap& second)
{
    if (first.new_height() != second.orig_height() || first.new_width() != second.orig_width()) {
        throw invalid_spec_error("cannot compose merge maps: reduced shape " +
                                 std::to_string(first.new_height()) + "x" +
                                 std::to_string(first.new_width()) + " != original shape " +
                                 std::to_string(second.orig_height()) + "x" +
                                 std::to_string(second.orig_width()));
    }
    std::vector<std::uint32_t> t(first.targets().size());
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = second.target(first.target(i));
    return MergeMap(first.orig_height(), first.orig_width(), second.new_height(),
                    second.new_width(), std::move(t));
}

/// Within every original row, reduced columns never decrease left to right.
inline bool columns_monotone_within_rows(const MergeMap& m)
{
    for (std::size_t r = 0; r < m.orig_height(); ++r) {
        for (std::size_t c = 1; c < m.orig_width(); ++c) {
            const auto a = m(r, c - 1), b = m(r, c);
            if (b.col < a.col) return false;
        }
    }
    return true;
}

/// Within every original column, reduced rows never decrease top to bottom.
inline bool rows_monotone_within_columns(const MergeMap& m)
{
    for (std::size_t c = 0; c < m.orig_width(); ++c) {
        for (std::size_t r = 1; r < m.orig_height(); ++r) {
            const auto a = m(r - 1, c), b = m(r, c);
            if (b.row < a.row) return false;
        }
    }
    return true;
}

/// CSV with header `orig_row,orig_col,new_row,new_col`, one line per original
/// position in row-major order.
inline std::string to_csv(const MergeMap& m)
{
    std::ostringstream out;
    out << "orig_row,orig_col,new_row,new_col\n";
    for (std::size_t r = 0; r < m.orig_height(); ++r) {
        for (std::size_t c = 0; c < m.orig_width(); ++c) {
            const auto p = m(r, c);
            out << r << ',' << c << ',' << p.row << ',' << p.col << '\n';
        }
    }
    return out.str();
}

} // namespace cubist
