#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "cubist/error.hpp"

namespace cubist {

/// Tokens collapsed into one representative. Member order is significant for
/// tie-breaking: destination first, then sources in spatial order.
template <typename T>
struct MergeGroup {
    std::vector<std::span<const T>> members;
    std::vector<std::uint32_t> sizes; // weighted average only
};

namespace detail {

template <typename T>
std::size_t check_members(std::span<const std::span<const T>> members, std::size_t out_dim)
{
    if (members.empty()) throw dimension_mismatch_error("merge group has no members");
    for (const auto& m : members) {
        if (m.size() != out_dim) {
            throw dimension_mismatch_error("merge group members differ in dimensionality");
        }
    }
    return out_dim;
}

} // namespace detail

/// Per channel, copy the entry with the largest magnitude (sign kept).
/// Ties go to the earliest member.
template <typename T>
void merge_max_per_dim(std::span<const std::span<const T>> members, std::span<T> out)
{
    const std::size_t d = detail::check_members(members, out.size());
    for (std::size_t i = 0; i < d; ++i) {
        T best = members[0][i];
        T best_abs = std::abs(best);
        for (std::size_t j = 1; j < members.size(); ++j) {
            const T a = std::abs(members[j][i]);
            if (a > best_abs) {
                best_abs = a;
                best = members[j][i];
            }
        }
        out[i] = best;
    }
}

template <typename T>
std::vector<T> merge_max_per_dim(std::span<const std::span<const T>> members)
{
    if (members.empty()) throw dimension_mismatch_error("merge group has no members");
    std::vector<T> out(members[0].size());
    merge_max_per_dim<T>(members, out);
    return out;
}

/// Size-weighted mean. Returns the combined size.
template <typename T>
std::uint64_t merge_weighted_average(std::span<const std::span<const T>> members,
                                     std::span<const std::uint32_t> sizes, std::span<T> out)
{
    const std::size_t d = detail::check_members(members, out.size());
    if (sizes.size() != members.size()) {
        throw dimension_mismatch_error("merge group sizes do not match its members");
    }
    std::uint64_t total = 0;
    for (auto s : sizes) {
        if (s == 0) throw invalid_spec_error("token size must be >= 1");
        total += s;
    }
    for (std::size_t i = 0; i < d; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < members.size(); ++j) {
            acc += static_cast<double>(sizes[j]) * static_cast<double>(members[j][i]);
        }
        out[i] = static_cast<T>(acc / static_cast<double>(total));
    }
    return total;
}

template <typename T>
struct WeightedToken {
    std::vector<T> token;
    std::uint64_t size = 0;
};

template <typename T>
WeightedToken<T> merge_weighted_average(std::span<const std::span<const T>> members,
                                        std::span<const std::uint32_t> sizes)
{
    if (members.empty()) throw dimension_mismatch_error("merge group has no members");
    WeightedToken<T> r{std::vector<T>(members[0].size()), 0};
    r.size = merge_weighted_average<T>(members, sizes, r.token);
    return r;
}

/// Index of the member with the largest L1 norm, earliest on ties.
template <typename T>
std::size_t max_l1_member(std::span<const std::span<const T>> members)
{
    if (members.empty()) throw dimension_mismatch_error("merge group has no members");
    std::size_t best = 0;
    double best_norm = -1.0;
    for (std::size_t j = 0; j < members.size(); ++j) {
        if (members[j].size() != members[0].size()) {
            throw dimension_mismatch_error("merge group members differ in dimensionality");
        }
        double norm = 0.0;
        for (T v : members[j]) norm += std::abs(static_cast<double>(v));
        if (norm > best_norm) {
            best_norm = norm;
            best = j;
        }
    }
    return best;
}

template <typename T>
void merge_max_vector(std::span<const std::span<const T>> members, std::span<T> out)
{
    detail::check_members(members, out.size());
    const auto& pick = members[max_l1_member(members)];
    std::copy(pick.begin(), pick.end(), out.begin());
}

template <typename T>
std::vector<T> merge_max_vector(std::span<const std::span<const T>> members)
{
    const auto& pick = members[max_l1_member(members)];
    return {pick.begin(), pick.end()};
}

template <typename T>
std::vector<T> merge_max_per_dim(const MergeGroup<T>& g)
{
    return merge_max_per_dim<T>(std::span<const std::span<const T>>(g.members));
}

template <typename T>
WeightedToken<T> merge_weighted_average(const MergeGroup<T>& g)
{
    return merge_weighted_average<T>(std::span<const std::span<const T>>(g.members),
                                     std::span<const std::uint32_t>(g.sizes));
}

template <typename T>
std::vector<T> merge_max_vector(const MergeGroup<T>& g)
{
    return merge_max_vector<T>(std::span<const std::span<const T>>(g.members));
}

} // namespace cubist
