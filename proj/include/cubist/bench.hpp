#pragma once

// Strategy/representation comparison and toy-ViT timing sweeps, with their
// CSV and JSON-lines formats.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cubist/error.hpp"
#include "cubist/grid.hpp"
#include "cubist/pipeline.hpp"
#include "cubist/synth.hpp"
#include "cubist/toy_vit.hpp"

namespace cubist {

struct CompareRow {
    Strategy strategy{};
    Representation representation{};
    ResolvedRates rates;
    std::optional<std::uint32_t> window;
    std::size_t in_h = 0, in_w = 0, dim = 0;
    std::size_t out_h = 0, out_w = 0;
    std::size_t merged_edges = 0;
    /// Similarity sum of the edges merged in the horizontal phase only.
    double retained_similarity_h = 0.0;
    double retained_similarity = 0.0;
    double mean_similarity = 0.0;
    /// Mean squared error of unmerge(reduced) against the input.
    double recon_mse = 0.0;
    double ms = 0.0;
};

inline double reconstruction_mse(const TokenGrid& input, const ReducedGrid& reduced)
{
    const TokenGrid back = unmerge(reduced);
    double acc = 0.0;
    const auto a = input.data();
    const auto b = back.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double e = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += e * e;
    }
    return acc / static_cast<double>(a.size());
}

/// One row per strategy x representation, strategies outermost. The strategy
/// and representation fields of `base` are ignored.
inline std::vector<CompareRow> compare_strategies(const TokenGrid& input, ReductionSpec base,
                                                  unsigned threads = 1)
{
    using clock = std::chrono::steady_clock;
    std::vector<CompareRow> rows;
    for (auto s : all_strategies) {
        for (auto m : all_representations) {
            ReductionSpec spec = base;
            spec.strategy = s;
            spec.representation = m;
            ReduceOptions opts;
            opts.threads = threads;
            const auto start = clock::now();
            const ReducedGrid red = cubist_reduce(input, spec, opts);
            const double ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();

            CompareRow row;
            row.strategy = s;
            row.representation = m;
            row.rates = red.rates;
            row.window = spec.window;
            row.in_h = input.height();
            row.in_w = input.width();
            row.dim = input.dim();
            row.out_h = red.tokens.height();
            row.out_w = red.tokens.width();
            row.merged_edges = red.merged_edges();
            row.retained_similarity_h =
                s == Strategy::bipartite_global ? red.similarity_sum()
                                                : red.similarity_sum(Axis::horizontal);
            row.retained_similarity = red.similarity_sum();
            row.mean_similarity = red.mean_similarity();
            row.recon_mse = reconstruction_mse(input, red);
            row.ms = ms;
            rows.push_back(row);
        }
    }
    return rows;
}

/// Naive-local keeps at least as much horizontal-phase similarity as
/// bipartite-local for every representation. Both see the same input there.
inline bool naive_dominates(const std::vector<CompareRow>& rows)
{
    for (const auto& b : rows) {
        if (b.strategy != Strategy::bipartite_local) continue;
        for (const auto& n : rows) {
            if (n.strategy == Strategy::naive_local && n.representation == b.representation &&
                n.rates == b.rates && n.retained_similarity_h < b.retained_similarity_h) {
                return false;
            }
        }
    }
    return true;
}

inline const char* compare_csv_header()
{
    return "strategy,representation,r_h,r_w,window,in_h,in_w,dim,out_h,out_w,merged_edges,"
           "retained_similarity_h,retained_similarity,mean_similarity,recon_mse,ms";
}

namespace detail {

inline std::string fmt_double(double v, int precision = 9)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", precision, v);
    return buf;
}

} // namespace detail

inline std::string to_csv_row(const CompareRow& r)
{
    std::ostringstream os;
    os << to_string(r.strategy) << ',' << to_string(r.representation) << ',' << r.rates.r_h << ','
       << r.rates.r_w << ',' << r.window.value_or(0) << ',' << r.in_h << ',' << r.in_w << ','
       << r.dim << ',' << r.out_h << ',' << r.out_w << ',' << r.merged_edges << ','
       << detail::fmt_double(r.retained_similarity_h) << ','
       << detail::fmt_double(r.retained_similarity) << ','
       << detail::fmt_double(r.mean_similarity) << ',' << detail::fmt_double(r.recon_mse) << ','
       << detail::fmt_double(r.ms, 4);
    return os.str();
}

struct BenchConfig {
    std::size_t depth = 12;
    std::size_t dim = 384;
    std::size_t heads = 6;
    std::size_t height = 56;
    std::size_t width = 56;
    /// Attention window; reduction also runs per window when set.
    std::optional<std::uint32_t> window;
    std::uint32_t layer = 0;
    /// Tokens removed per row and per column (r_h = r_w).
    std::vector<std::uint32_t> rates{0, 2, 4, 6};
    std::size_t repeats = 3;
    std::uint64_t seed = 0;
    Strategy strategy = Strategy::bipartite_local;
    Representation representation = Representation::max_per_dim;
    PosMode pos_mode = PosMode::rope2d;
    unsigned threads = 1;
};

struct BenchRow {
    Strategy strategy{};
    Representation representation{};
    std::uint32_t r_h = 0, r_w = 0;
    std::uint32_t layer = 0;
    std::optional<std::uint32_t> window;
    std::size_t in_h = 0, in_w = 0, dim = 0;
    std::size_t out_h = 0, out_w = 0;
    double mean_similarity = 0.0;
    /// Median over the timed repeats.
    double ms = 0.0;
    double speedup = 1.0;
    std::uint64_t checksum = 0;
    /// Per-layer trace of the last timed repeat.
    std::vector<LayerTrace> trace;
};

/// FNV-1a over the raw float bytes.
inline std::uint64_t checksum(const TokenGrid& g)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    const auto* p = reinterpret_cast<const unsigned char*>(g.data().data());
    for (std::size_t i = 0; i < g.data().size_bytes(); ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline double median(std::vector<double> v)
{
    if (v.empty()) throw invalid_spec_error("median of nothing");
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline ToyViTConfig model_config(const BenchConfig& c, std::uint32_t rate)
{
    ToyViTConfig mc;
    mc.depth = c.depth;
    mc.dim = c.dim;
    mc.heads = c.heads;
    mc.window = c.window;
    mc.pos_mode = c.pos_mode;
    mc.seed = c.seed;
    mc.threads = c.threads;
    if (rate > 0) {
        ReductionSpec spec;
        spec.layer = c.layer;
        spec.rate_h = Rate::count(rate);
        spec.rate_w = Rate::count(rate);
        spec.window = c.window;
        spec.strategy = c.strategy;
        spec.representation = c.representation;
        mc.reduction = spec;
    }
    return mc;
}

/// Rate 0 runs without a reduction layer and is the speedup baseline. It is
/// added when missing and always reported first.
inline std::vector<BenchRow> run_bench(const BenchConfig& c)
{
    if (c.repeats == 0) throw invalid_spec_error("repeats must be >= 1");
    if (c.rates.empty()) throw invalid_spec_error("rate list is empty");
    std::vector<std::uint32_t> rates = c.rates;
    rates.erase(std::remove(rates.begin(), rates.end(), 0u), rates.end());
    rates.insert(rates.begin(), 0u);

    // Validate every configuration before spending time on any of them.
    std::vector<ToyViT> models;
    for (auto r : rates) models.emplace_back(model_config(c, r));

    const TokenGrid input =
        generate_grid(c.height, c.width, c.dim, Pattern::blobs, c.seed).grid;
    std::vector<BenchRow> rows;
    for (std::size_t i = 0; i < rates.size(); ++i) {
        const ToyViT& model = models[i];
        (void)model.forward(input); // warm-up
        std::vector<double> times;
        ForwardResult last{input, {}, std::nullopt, false};
        for (std::size_t k = 0; k < c.repeats; ++k) {
            auto res = model.forward(input);
            double total = 0.0;
            for (const auto& t : res.trace) total += t.ms;
            times.push_back(total);
            last = std::move(res);
        }
        BenchRow row;
        row.strategy = c.strategy;
        row.representation = c.representation;
        row.r_h = row.r_w = rates[i];
        row.layer = c.layer;
        row.window = c.window;
        row.in_h = c.height;
        row.in_w = c.width;
        row.dim = c.dim;
        row.out_h = last.output.height();
        row.out_w = last.output.width();
        row.mean_similarity = last.reduction ? last.reduction->mean_similarity() : 0.0;
        row.ms = median(times);
        row.checksum = checksum(last.output);
        row.trace = std::move(last.trace);
        rows.push_back(std::move(row));
    }
    for (auto& row : rows) row.speedup = rows.front().ms / row.ms;
    return rows;
}

inline const char* bench_csv_header()
{
    return "strategy,representation,r_h,r_w,layer,window,in_h,in_w,dim,out_h,out_w,"
           "mean_similarity,ms,speedup,output_checksum";
}

inline std::string to_csv_row(const BenchRow& r)
{
    char sum[17];
    std::snprintf(sum, sizeof sum, "%016llx", static_cast<unsigned long long>(r.checksum));
    std::ostringstream os;
    os << to_string(r.strategy) << ',' << to_string(r.representation) << ',' << r.r_h << ','
       << r.r_w << ',' << r.layer << ',' << r.window.value_or(0) << ',' << r.in_h << ','
       << r.in_w << ',' << r.dim << ',' << r.out_h << ',' << r.out_w << ','
       << detail::fmt_double(r.mean_similarity) << ',' << detail::fmt_double(r.ms, 6) << ','
       << detail::fmt_double(r.speedup, 6) << ',' << sum;
    return os.str();
}

/// One {"layer","tokens","ms"} object per line.
inline std::string trace_jsonl(const std::vector<LayerTrace>& trace)
{
    std::string out;
    for (const auto& t : trace) {
        nlohmann::ordered_json j;
        j["layer"] = t.layer;
        j["tokens"] = t.tokens;
        j["ms"] = t.ms;
        out += j.dump();
        out += '\n';
    }
    return out;
}

} // namespace cubist
