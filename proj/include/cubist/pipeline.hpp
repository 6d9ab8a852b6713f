#pragma once

// Two-phase structured reduction: every row loses r_w tokens, then every
// column loses r_h tokens, optionally inside independent windows.

#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cubist/error.hpp"
#include "cubist/grid.hpp"
#include "cubist/matching.hpp"
#include "cubist/merge_map.hpp"
#include "cubist/merge_repr.hpp"

namespace cubist {

enum class Axis { horizontal, vertical, flat };

inline std::string_view to_string(Axis a) noexcept
{
    switch (a) {
    case Axis::horizontal: return "horizontal";
    case Axis::vertical: return "vertical";
    case Axis::flat: return "flat";
    }
    return "?";
}

struct ReduceOptions {
    /// Worker threads for per-line work. Results do not depend on this.
    unsigned threads = 1;
    /// Matching features, same shape as the tokens. Defaults to the tokens.
    const TokenGrid* features = nullptr;
    /// Incoming token sizes; all ones when absent.
    const TokenSizeGrid* sizes = nullptr;
};

struct PhaseResult {
    TokenGrid grid;
    std::optional<TokenSizeGrid> sizes;    // weighted average only
    std::optional<TokenGrid> features;     // only when separate features were supplied
    MergeMap map;
    std::vector<EdgeSet> edges;            // per line; flat phases have one entry
};

/// Edges and map of one phase within one region.
struct PhaseRecord {
    Axis axis;
    std::size_t region;                    // row-major window index, 0 without windows
    MergeMap map;
    std::vector<EdgeSet> edges;
};

struct ReducedGrid {
    TokenGrid tokens;
    std::optional<TokenSizeGrid> sizes;
    MergeMap map;
    ResolvedRates rates;
    std::optional<std::uint32_t> window;
    /// False for the global baseline, whose output is a flat 1 x N' token list.
    bool structured = true;
    std::vector<PhaseRecord> phases;

    std::size_t merged_edges() const noexcept
    {
        std::size_t n = 0;
        for (const auto& p : phases)
            for (const auto& e : p.edges) n += e.size();
        return n;
    }

    double similarity_sum(std::optional<Axis> axis = std::nullopt) const
    {
        double total = 0.0;
        for (const auto& p : phases) {
            if (axis && p.axis != *axis) continue;
            for (const auto& e : p.edges) total += cubist::similarity_sum(e);
        }
        return total;
    }

    double mean_similarity() const
    {
        const auto n = merged_edges();
        return n == 0 ? 0.0 : similarity_sum() / static_cast<double>(n);
    }
};

namespace detail {

template <typename F>
void parallel_for(std::size_t n, unsigned threads, F&& body)
{
    if (threads <= 1 || n < 2) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(threads, n));
    std::exception_ptr failure;
    std::mutex failure_mutex;
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (unsigned t = 0; t < workers; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i = t; i < n; i += workers) body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            });
        }
    }
    if (failure) std::rethrow_exception(failure);
}

inline void merge_into(Representation repr, std::span<const std::span<const float>> members,
                       std::span<const std::uint32_t> member_sizes, std::span<float> out)
{
    switch (repr) {
    case Representation::max_per_dim: merge_max_per_dim<float>(members, out); break;
    case Representation::max_vector: merge_max_vector<float>(members, out); break;
    case Representation::weighted_average:
        merge_weighted_average<float>(members, member_sizes, out);
        break;
    }
}

inline std::size_t max_merges(Strategy s, std::size_t line_length)
{
    return s == Strategy::bipartite_local ? line_length / 2 : line_length - 1;
}

inline TokenSizeGrid size_window(const TokenSizeGrid& sizes, std::size_t wi, std::size_t wj,
                                 std::size_t window)
{
    std::vector<std::uint32_t> v;
    v.reserve(window * window);
    for (std::size_t r = 0; r < window; ++r)
        for (std::size_t c = 0; c < window; ++c)
            v.push_back(sizes.at(wi * window + r, wj * window + c));
    return TokenSizeGrid(window, window, std::move(v));
}

} // namespace detail

/// One phase of local reduction: every line along `axis` loses exactly `r` tokens.
/// Merged tokens take their destination's slot; emptied slots are compacted out.
inline PhaseResult reduce_phase(const TokenGrid& grid, Axis axis, std::uint32_t r,
                                Strategy strategy, Representation repr,
                                const ReduceOptions& options = {})
{
    if (axis == Axis::flat || strategy == Strategy::bipartite_global) {
        throw invalid_spec_error("reduce_phase handles local strategies along rows or columns");
    }
    if (options.features && (options.features->height() != grid.height() ||
                              options.features->width() != grid.width())) {
        throw invalid_spec_error("feature grid shape does not match the token grid");
    }
    if (options.sizes &&
        (options.sizes->height() != grid.height() || options.sizes->width() != grid.width())) {
        throw invalid_spec_error("size grid shape does not match the token grid");
    }
    const bool horizontal = axis == Axis::horizontal;
    const char* line_name = horizontal ? "row" : "column";
    const std::size_t n_lines = horizontal ? grid.height() : grid.width();
    const std::size_t len = horizontal ? grid.width() : grid.height();
    if (r >= len) {
        throw invalid_spec_error("cannot remove " + std::to_string(r) + " tokens from a " +
                                 line_name + " of " + std::to_string(len));
    }
    if (r > 0 && r > detail::max_merges(strategy, len)) {
        throw infeasible_rate_error(std::string(to_string(strategy)) + " can remove at most " +
                                    std::to_string(detail::max_merges(strategy, len)) +
                                    " tokens per " + line_name + " of " + std::to_string(len) +
                                    ", requested " + std::to_string(r));
    }

    const bool weighted = repr == Representation::weighted_average;
    const std::size_t out_h = horizontal ? grid.height() : grid.height() - r;
    const std::size_t out_w = horizontal ? grid.width() - r : grid.width();
    const std::size_t out_len = len - r;
    const TokenGrid& feats = options.features ? *options.features : grid;

    auto flat_in = [&](std::size_t line, std::size_t off) {
        return horizontal ? line * grid.width() + off : off * grid.width() + line;
    };
    auto flat_out = [&](std::size_t line, std::size_t off) {
        return horizontal ? line * out_w + off : off * out_w + line;
    };
    auto size_of = [&](std::size_t flat) -> std::uint32_t {
        return options.sizes ? options.sizes->values()[flat] : 1u;
    };

    PhaseResult res{TokenGrid(out_h, out_w, grid.dim()),
                    std::nullopt,
                    std::nullopt,
                    MergeMap::identity(1, 1),
                    std::vector<EdgeSet>(n_lines)};
    std::vector<std::uint32_t> out_sizes(weighted ? out_h * out_w : 0);
    if (options.features) res.features.emplace(out_h, out_w, feats.dim());
    std::vector<std::uint32_t> targets(grid.token_count());

    detail::parallel_for(n_lines, options.threads, [&](std::size_t line) {
        std::vector<std::span<const float>> ftoks(len);
        for (std::size_t o = 0; o < len; ++o) ftoks[o] = feats.token(flat_in(line, o));
        EdgeSet edges;
        if (r > 0) {
            const PathLine path = make_line(std::move(ftoks));
            edges = strategy == Strategy::bipartite_local
                        ? select_edges_bipartite(nominate(path, assign_roles(len, 0)), r)
                        : select_edges_naive(path, r);
        }
        const LineGroups groups = resolve_groups(len, edges);

        std::vector<std::span<const float>> members;
        std::vector<std::uint32_t> member_sizes;
        for (std::size_t slot = 0; slot < out_len; ++slot) {
            const auto& group = groups.members[slot];
            member_sizes.clear();
            for (auto o : group) member_sizes.push_back(size_of(flat_in(line, o)));
            members.clear();
            for (auto o : group) members.push_back(grid.token(flat_in(line, o)));
            const auto dst = flat_out(line, slot);
            detail::merge_into(repr, members, member_sizes, res.grid.token(dst));
            if (res.features) {
                members.clear();
                for (auto o : group) members.push_back(feats.token(flat_in(line, o)));
                detail::merge_into(repr, members, member_sizes, res.features->token(dst));
            }
            if (weighted) {
                std::uint64_t total = 0;
                for (auto s : member_sizes) total += s;
                out_sizes[dst] = static_cast<std::uint32_t>(total);
            }
        }
        for (std::size_t o = 0; o < len; ++o) {
            targets[flat_in(line, o)] = static_cast<std::uint32_t>(flat_out(line, groups.new_index[o]));
        }
        res.edges[line] = std::move(edges);
    });

    res.map = MergeMap(grid.height(), grid.width(), out_h, out_w, std::move(targets));
    if (weighted) res.sizes.emplace(out_h, out_w, std::move(out_sizes));
    return res;
}

inline PhaseResult reduce_horizontal(const TokenGrid& grid, std::uint32_t r_w, Strategy strategy,
                                     Representation repr, const ReduceOptions& options = {})
{
    return reduce_phase(grid, Axis::horizontal, r_w, strategy, repr, options);
}

inline PhaseResult reduce_vertical(const TokenGrid& grid, std::uint32_t r_h, Strategy strategy,
                                   Representation repr, const ReduceOptions& options = {})
{
    return reduce_phase(grid, Axis::vertical, r_h, strategy, repr, options);
}

/// ToMe-style baseline on one region, flattened row-major. The result is a
/// 1 x (N - k) token list.
inline PhaseResult reduce_global(const TokenGrid& grid, std::size_t k, Representation repr,
                                 const ReduceOptions& options = {})
{
    const std::size_t n = grid.token_count();
    const TokenGrid& feats = options.features ? *options.features : grid;
    std::vector<std::span<const float>> ftoks(n);
    for (std::size_t i = 0; i < n; ++i) ftoks[i] = feats.token(i);
    EdgeSet edges = select_edges_global(ftoks, k);
    const LineGroups groups = resolve_groups(n, edges);
    const std::size_t out_n = n - k;
    const bool weighted = repr == Representation::weighted_average;

    PhaseResult res{TokenGrid(1, out_n, grid.dim()), std::nullopt, std::nullopt,
                    MergeMap::identity(1, 1), {}};
    if (options.features) res.features.emplace(1, out_n, feats.dim());
    std::vector<std::uint32_t> out_sizes(weighted ? out_n : 0);
    std::vector<std::span<const float>> members;
    std::vector<std::uint32_t> member_sizes;
    for (std::size_t slot = 0; slot < out_n; ++slot) {
        const auto& group = groups.members[slot];
        member_sizes.clear();
        for (auto o : group) member_sizes.push_back(options.sizes ? options.sizes->values()[o] : 1u);
        members.clear();
        for (auto o : group) members.push_back(grid.token(o));
        detail::merge_into(repr, members, member_sizes, res.grid.token(slot));
        if (res.features) {
            members.clear();
            for (auto o : group) members.push_back(feats.token(o));
            detail::merge_into(repr, members, member_sizes, res.features->token(slot));
        }
        if (weighted) {
            std::uint64_t total = 0;
            for (auto s : member_sizes) total += s;
            out_sizes[slot] = static_cast<std::uint32_t>(total);
        }
    }
    std::vector<std::uint32_t> targets(groups.new_index.begin(), groups.new_index.end());
    res.map = MergeMap(grid.height(), grid.width(), 1, out_n, std::move(targets));
    if (weighted) res.sizes.emplace(1, out_n, std::move(out_sizes));
    res.edges.push_back(std::move(edges));
    return res;
}

namespace detail {

struct RegionResult {
    TokenGrid tokens;
    std::optional<TokenSizeGrid> sizes;
    MergeMap map;
};

inline RegionResult reduce_region(const TokenGrid& grid, const TokenGrid* features,
                                  const TokenSizeGrid* sizes, ResolvedRates rates,
                                  const ReductionSpec& spec, unsigned threads,
                                  std::size_t region, std::vector<PhaseRecord>& log)
{
    const bool weighted = spec.representation == Representation::weighted_average;
    if (spec.strategy == Strategy::bipartite_global) {
        const std::size_t kept = (grid.height() - rates.r_h) * (grid.width() - rates.r_w);
        auto g = reduce_global(grid, grid.token_count() - kept, spec.representation,
                               {threads, features, sizes});
        log.push_back({Axis::flat, region, g.map, g.edges});
        return {std::move(g.grid), std::move(g.sizes), std::move(g.map)};
    }
    auto h = reduce_phase(grid, Axis::horizontal, rates.r_w, spec.strategy, spec.representation,
                          {threads, features, sizes});
    const TokenGrid* vfeatures = h.features ? &*h.features : nullptr;
    const TokenSizeGrid* vsizes = h.sizes ? &*h.sizes : nullptr;
    auto v = reduce_phase(h.grid, Axis::vertical, rates.r_h, spec.strategy, spec.representation,
                          {threads, vfeatures, vsizes});
    MergeMap map = compose_maps(h.map, v.map);
    log.push_back({Axis::horizontal, region, std::move(h.map), std::move(h.edges)});
    log.push_back({Axis::vertical, region, v.map, std::move(v.edges)});
    std::optional<TokenSizeGrid> out_sizes;
    if (weighted) out_sizes = std::move(v.sizes);
    return {std::move(v.grid), std::move(out_sizes), std::move(map)};
}

} // namespace detail

/// Full reduction: horizontal phase then vertical phase, run per window when
/// the spec sets one. A structured result has shape
/// (H/w)(w - r_h) x (W/w)(w - r_w), or (H - r_h) x (W - r_w) without windows.
inline ReducedGrid cubist_reduce(const TokenGrid& grid, const ReductionSpec& spec,
                                 const ReduceOptions& options = {})
{
    const auto [region_h, region_w] = region_extent(spec, grid.height(), grid.width());
    const ResolvedRates rates = resolve_rates(spec, region_h, region_w);
    const bool structured = spec.strategy != Strategy::bipartite_global;

    std::vector<PhaseRecord> log;
    if (!spec.window) {
        auto rr = detail::reduce_region(grid, options.features, options.sizes, rates, spec,
                                        options.threads, 0, log);
        return {std::move(rr.tokens), std::move(rr.sizes), std::move(rr.map),
                rates, spec.window, structured, std::move(log)};
    }

    const std::size_t w = *spec.window;
    const std::size_t wrows = grid.height() / w;
    const std::size_t wcols = grid.width() / w;
    const auto windows = window_partition(grid, w);
    std::optional<std::vector<TokenGrid>> fwindows;
    if (options.features) fwindows = window_partition(*options.features, w);

    std::vector<detail::RegionResult> parts;
    parts.reserve(windows.size());
    for (std::size_t k = 0; k < windows.size(); ++k) {
        std::optional<TokenSizeGrid> wsizes;
        if (options.sizes) wsizes = detail::size_window(*options.sizes, k / wcols, k % wcols, w);
        parts.push_back(detail::reduce_region(windows[k], fwindows ? &(*fwindows)[k] : nullptr,
                                              wsizes ? &*wsizes : nullptr, rates, spec,
                                              options.threads, k, log));
    }

    const std::size_t d = grid.dim();
    const std::size_t ph = parts.front().tokens.height();
    const std::size_t pw = parts.front().tokens.width();
    const std::size_t out_h = structured ? wrows * ph : 1;
    const std::size_t out_w = structured ? wcols * pw : windows.size() * pw;
    TokenGrid tokens(out_h, out_w, d);
    std::vector<std::uint32_t> targets(grid.token_count());
    std::optional<std::vector<std::uint32_t>> sizes;
    if (parts.front().sizes) sizes.emplace(out_h * out_w);

    for (std::size_t k = 0; k < parts.size(); ++k) {
        const std::size_t wi = k / wcols, wj = k % wcols;
        // Top-left corner of this window's block in the output.
        const std::size_t row0 = structured ? wi * ph : 0;
        const std::size_t col0 = structured ? wj * pw : k * pw;
        const auto& part = parts[k];
        for (std::size_t r = 0; r < ph; ++r) {
            for (std::size_t c = 0; c < pw; ++c) {
                const std::size_t dst = (row0 + r) * out_w + col0 + c;
                auto src = part.tokens.token(r, c);
                std::copy(src.begin(), src.end(), tokens.token(dst).begin());
                if (sizes) (*sizes)[dst] = part.sizes->at(r, c);
            }
        }
        for (std::size_t r = 0; r < w; ++r) {
            for (std::size_t c = 0; c < w; ++c) {
                const auto p = part.map(r, c);
                targets[(wi * w + r) * grid.width() + wj * w + c] =
                    static_cast<std::uint32_t>((row0 + p.row) * out_w + col0 + p.col);
            }
        }
    }

    std::optional<TokenSizeGrid> size_grid;
    if (sizes) size_grid.emplace(out_h, out_w, std::move(*sizes));
    return {std::move(tokens),
            std::move(size_grid),
            MergeMap(grid.height(), grid.width(), out_h, out_w, std::move(targets)),
            rates,
            spec.window,
            structured,
            std::move(log)};
}

/// Dense recovery: every original position receives its representative.
inline TokenGrid unmerge(const ReducedGrid& reduced)
{
    const auto& m = reduced.map;
    TokenGrid out(m.orig_height(), m.orig_width(), reduced.tokens.dim());
    for (std::size_t p = 0; p < m.orig_height() * m.orig_width(); ++p) {
        auto src = reduced.tokens.token(m.target(p));
        std::copy(src.begin(), src.end(), out.token(p).begin());
    }
    return out;
}

} // namespace cubist
