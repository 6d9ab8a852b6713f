#pragma once

// Edge selection over path graphs (one row or column of tokens) and the
// ToMe-style global baseline.
//
// Ordering used everywhere: higher similarity first, then lower source
// offset, then lower destination offset.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cubist/error.hpp"

namespace cubist {

enum class Role : std::uint8_t { source, destination };

using RoleAssignment = std::vector<Role>;

struct Edge {
    std::uint32_t src = 0;
    std::uint32_t dst = 0;
    double similarity = 0.0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

using EdgeSet = std::vector<Edge>;

/// Tokens of one row or column, in spatial order. `positions` are the original
/// offsets along the line and must be strictly increasing.
struct PathLine {
    std::vector<std::span<const float>> tokens;
    std::vector<std::uint32_t> positions;

    std::size_t size() const noexcept { return tokens.size(); }
};

inline PathLine make_line(std::vector<std::span<const float>> tokens)
{
    PathLine line;
    line.positions.resize(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) line.positions[i] = static_cast<std::uint32_t>(i);
    line.tokens = std::move(tokens);
    return line;
}

/// Cosine similarity, accumulated in double. Zero vectors score 0 against anything.
template <typename T>
double similarity(std::span<const T> u, std::span<const T> v)
{
    if (u.size() != v.size()) {
        throw dimension_mismatch_error("similarity of vectors with different lengths");
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double a = u[i];
        const double b = v[i];
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
}

inline double similarity(std::span<const float> u, std::span<const float> v)
{
    return similarity<float>(u, v);
}

/// Alternating roles. Parity 0 puts a destination at offset 0.
inline RoleAssignment assign_roles(std::size_t line_length, unsigned parity = 0)
{
    if (line_length < 2) {
        throw invalid_line_error("path line needs at least 2 tokens, got " +
                                 std::to_string(line_length));
    }
    RoleAssignment roles(line_length);
    for (std::size_t i = 0; i < line_length; ++i) {
        roles[i] = ((i + parity) % 2 == 0) ? Role::destination : Role::source;
    }
    return roles;
}

inline std::size_t source_count(const RoleAssignment& roles)
{
    return static_cast<std::size_t>(std::count(roles.begin(), roles.end(), Role::source));
}

namespace detail {

inline bool edge_before(const Edge& a, const Edge& b) noexcept
{
    if (a.similarity != b.similarity) return a.similarity > b.similarity;
    if (a.src != b.src) return a.src < b.src;
    return a.dst < b.dst;
}

inline EdgeSet top_k(EdgeSet edges, std::size_t k)
{
    if (k > edges.size()) {
        throw infeasible_rate_error("cannot select " + std::to_string(k) + " edges from " +
                                    std::to_string(edges.size()) + " candidates");
    }
    std::partial_sort(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(k), edges.end(),
                      edge_before);
    edges.resize(k);
    return edges;
}

} // namespace detail

/// One candidate per source: its more similar adjacent neighbour, lower offset on ties.
inline EdgeSet nominate(const PathLine& line, const RoleAssignment& roles)
{
    const std::size_t n = line.size();
    if (roles.size() != n) {
        throw invalid_line_error("role assignment length does not match the line");
    }
    EdgeSet out;
    out.reserve(n / 2 + 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (roles[i] != Role::source) continue;
        Edge best{static_cast<std::uint32_t>(i), 0, -2.0};
        for (std::size_t j : {i - 1, i + 1}) {
            if (j >= n || roles[j] != Role::destination) continue; // i-1 wraps when i == 0
            const double s = similarity(line.tokens[i], line.tokens[j]);
            if (s > best.similarity) {
                best.dst = static_cast<std::uint32_t>(j);
                best.similarity = s;
            }
        }
        if (best.similarity > -2.0) out.push_back(best);
    }
    return out;
}

/// The k best nominations.
inline EdgeSet select_edges_bipartite(const EdgeSet& candidates, std::size_t k)
{
    return detail::top_k(candidates, k);
}

/// The k most similar of the L-1 adjacent edges, unconstrained. Edge (i, i+1)
/// is stored as src = i+1, dst = i, so consecutive selections chain leftwards
/// into a single group.
inline EdgeSet select_edges_naive(const PathLine& line, std::size_t k)
{
    const std::size_t n = line.size();
    if (n < 2) throw invalid_line_error("path line needs at least 2 tokens");
    if (k > n - 1) {
        throw infeasible_rate_error("naive selection of " + std::to_string(k) +
                                    " edges exceeds the " + std::to_string(n - 1) +
                                    " edges of the line");
    }
    EdgeSet edges;
    edges.reserve(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        edges.push_back({static_cast<std::uint32_t>(i + 1), static_cast<std::uint32_t>(i),
                         similarity(line.tokens[i], line.tokens[i + 1])});
    }
    // Rank by the left endpoint so ties prefer the lowest edge index.
    std::partial_sort(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(k), edges.end(),
                      [](const Edge& a, const Edge& b) {
                          if (a.similarity != b.similarity) return a.similarity > b.similarity;
                          return a.dst < b.dst;
                      });
    edges.resize(k);
    return edges;
}

/// ToMe-style baseline over a flattened region: even flat indices are
/// destinations, odd are sources, and each source may nominate any destination.
inline EdgeSet select_edges_global(std::span<const std::span<const float>> tokens, std::size_t k)
{
    const std::size_t n = tokens.size();
    if (2 * k > n) {
        throw infeasible_rate_error("global matching of " + std::to_string(k) +
                                    " merges needs at least " + std::to_string(2 * k) +
                                    " tokens, region has " + std::to_string(n));
    }
    EdgeSet candidates;
    candidates.reserve(n / 2);
    for (std::size_t s = 1; s < n; s += 2) {
        Edge best{static_cast<std::uint32_t>(s), 0, -2.0};
        for (std::size_t d = 0; d < n; d += 2) {
            const double sim = similarity(tokens[s], tokens[d]);
            if (sim > best.similarity) {
                best.dst = static_cast<std::uint32_t>(d);
                best.similarity = sim;
            }
        }
        candidates.push_back(best);
    }
    return detail::top_k(std::move(candidates), k);
}

/// Sum of edge similarities, added largest first so equal multisets give
/// bit-identical sums.
inline double similarity_sum(const EdgeSet& edges)
{
    std::vector<double> sims;
    sims.reserve(edges.size());
    for (const auto& e : edges) sims.push_back(e.similarity);
    std::sort(sims.begin(), sims.end(), std::greater<>{});
    double total = 0.0;
    for (double s : sims) total += s;
    return total;
}

/// How a line collapses once an EdgeSet is applied.
struct LineGroups {
    /// Offset whose slot holds each offset's merged token.
    std::vector<std::uint32_t> representative;
    /// Surviving slots in increasing order.
    std::vector<std::uint32_t> survivors;
    /// Output index of each offset after compaction.
    std::vector<std::uint32_t> new_index;
    /// Members of each survivor's group: representative first, then the rest ascending.
    std::vector<std::vector<std::uint32_t>> members;
};

/// Resolve merge groups by following src -> dst until reaching a token that is
/// not itself a selected source. Bipartite sets resolve in one hop; naive chains
/// resolve to their leftmost token.
inline LineGroups resolve_groups(std::size_t line_length, const EdgeSet& edges)
{
    constexpr auto none = static_cast<std::uint32_t>(-1);
    std::vector<std::uint32_t> target(line_length, none);
    for (const auto& e : edges) {
        if (e.src >= line_length || e.dst >= line_length) {
            throw invalid_line_error("edge endpoint outside the line");
        }
        if (target[e.src] != none) {
            throw invalid_line_error("token " + std::to_string(e.src) +
                                     " is the source of more than one edge");
        }
        target[e.src] = e.dst;
    }
    LineGroups g;
    g.representative.resize(line_length);
    g.new_index.resize(line_length);
    for (std::size_t i = 0; i < line_length; ++i) {
        std::uint32_t r = static_cast<std::uint32_t>(i);
        std::size_t hops = 0;
        while (target[r] != none) {
            r = target[r];
            if (++hops > line_length) throw invalid_line_error("cyclic edge set");
        }
        g.representative[i] = r;
    }
    std::vector<std::uint32_t> slot_of(line_length, none);
    for (std::size_t i = 0; i < line_length; ++i) {
        if (target[i] == none) {
            slot_of[i] = static_cast<std::uint32_t>(g.survivors.size());
            g.survivors.push_back(static_cast<std::uint32_t>(i));
            g.members.push_back({static_cast<std::uint32_t>(i)});
        }
    }
    for (std::size_t i = 0; i < line_length; ++i) {
        const auto slot = slot_of[g.representative[i]];
        g.new_index[i] = slot;
        if (g.representative[i] != i) g.members[slot].push_back(static_cast<std::uint32_t>(i));
    }
    return g;
}

} // namespace cubist
