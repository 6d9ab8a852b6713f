// cubist: reduce, compare and benchmark structured token merging.
//
// Exit codes: 0 ok, 1 internal failure, 2 invalid spec or arguments,
// 3 missing or malformed file.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cubist/bench.hpp"
#include "cubist/grid_file.hpp"
#include "cubist/merge_map.hpp"
#include "cubist/pipeline.hpp"
#include "cubist/synth.hpp"

namespace {

using namespace cubist;

constexpr int exit_internal = 1;
constexpr int exit_spec = 2;
constexpr int exit_file = 3;

struct ShapeArg {
    std::size_t h = 0, w = 0;
};

ShapeArg parse_shape(const std::string& s)
{
    const auto x = s.find_first_of("xX");
    try {
        if (x != std::string::npos) {
            std::size_t a = 0, b = 0;
            const long long h = std::stoll(s.substr(0, x), &a);
            const long long w = std::stoll(s.substr(x + 1), &b);
            if (a == x && b == s.size() - x - 1 && h > 0 && w > 0) {
                return {static_cast<std::size_t>(h), static_cast<std::size_t>(w)};
            }
        }
    } catch (const std::logic_error&) {
    }
    throw invalid_spec_error("grid shape must look like HxW with positive sides, got '" + s + "'");
}

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw malformed_file_error("cannot open '" + path + "' for writing");
    f << text;
    if (!f) throw malformed_file_error("failed writing '" + path + "'");
}

void emit(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-") {
        std::cout << text;
    } else {
        write_text(path, text);
    }
}

struct ReduceArgs {
    std::string input;
    std::string output;
    std::string map;
    std::string rh = "0";
    std::string rw = "0";
    std::optional<std::uint32_t> window;
    std::string strategy = "bipartite_local";
    std::string repr = "max_per_dim";
    unsigned threads = 1;
};

ReductionSpec make_spec(const ReduceArgs& a)
{
    ReductionSpec spec;
    spec.rate_h = Rate::parse(a.rh);
    spec.rate_w = Rate::parse(a.rw);
    spec.window = a.window;
    spec.strategy = parse_strategy(a.strategy);
    spec.representation = parse_representation(a.repr);
    return spec;
}

int cmd_reduce(const ReduceArgs& a)
{
    const ReductionSpec spec = make_spec(a);
    const TokenGrid grid = load_grid(a.input);
    ReduceOptions opts;
    opts.threads = a.threads;
    const ReducedGrid red = cubist_reduce(grid, spec, opts);
    save_grid(red.tokens, a.output);
    if (!a.map.empty()) write_text(a.map, to_csv(red.map));
    std::cerr << grid.height() << "x" << grid.width() << "x" << grid.dim() << " -> "
              << red.tokens.height() << "x" << red.tokens.width() << "x" << red.tokens.dim()
              << " (r_h=" << red.rates.r_h << ", r_w=" << red.rates.r_w << ")\n";
    return 0;
}

int cmd_compare(const ReduceArgs& a, const std::string& k_list)
{
    const TokenGrid grid = load_grid(a.input);
    ReductionSpec base = make_spec(a);
    std::vector<std::pair<Rate, Rate>> rates;
    if (k_list.empty()) {
        rates.emplace_back(base.rate_h, base.rate_w);
    } else {
        for (const auto& k : split_list(k_list)) rates.emplace_back(Rate::parse(k), Rate::parse(k));
        if (rates.empty()) throw invalid_spec_error("--k-list is empty");
    }
    std::string out = std::string(compare_csv_header()) + "\n";
    bool ok = true;
    for (const auto& [h, w] : rates) {
        base.rate_h = h;
        base.rate_w = w;
        const auto rows = compare_strategies(grid, base, a.threads);
        for (const auto& r : rows) out += to_csv_row(r) + "\n";
        ok = ok && naive_dominates(rows);
    }
    emit(a.output, out);
    if (!ok) {
        std::cerr << "error: naive_local retained less horizontal similarity than bipartite_local\n";
        return exit_internal;
    }
    return 0;
}

struct BenchArgs {
    std::size_t depth = 12;
    std::size_t dim = 384;
    std::size_t heads = 6;
    std::string grid = "56x56";
    std::optional<std::uint32_t> window;
    std::uint32_t layer = 0;
    std::string rates = "0,2,4,6";
    std::size_t repeats = 3;
    std::uint64_t seed = 0;
    std::string strategy = "bipartite_local";
    std::string repr = "max_per_dim";
    std::string pos = "rope2d";
    std::string output;
    std::string trace;
};

int cmd_bench(const BenchArgs& a)
{
    BenchConfig c;
    c.depth = a.depth;
    c.dim = a.dim;
    c.heads = a.heads;
    const auto shape = parse_shape(a.grid);
    c.height = shape.h;
    c.width = shape.w;
    c.window = a.window;
    c.layer = a.layer;
    c.rates.clear();
    for (const auto& r : split_list(a.rates)) {
        const Rate rate = Rate::parse(r);
        if (rate.is_fraction()) throw invalid_spec_error("bench rates must be integer counts");
        c.rates.push_back(rate.resolve(0));
    }
    c.repeats = a.repeats;
    c.seed = a.seed;
    c.strategy = parse_strategy(a.strategy);
    c.representation = parse_representation(a.repr);
    if (a.pos == "rope2d") {
        c.pos_mode = PosMode::rope2d;
    } else if (a.pos == "none") {
        c.pos_mode = PosMode::none;
    } else {
        throw invalid_spec_error("unknown position mode '" + a.pos + "'");
    }

    const auto rows = run_bench(c);
    std::string out = std::string(bench_csv_header()) + "\n";
    for (const auto& r : rows) out += to_csv_row(r) + "\n";
    emit(a.output, out);
    if (!a.trace.empty()) {
        for (const auto& r : rows) {
            write_text(a.trace + ".r" + std::to_string(r.r_h) + ".jsonl", trace_jsonl(r.trace));
        }
    }
    return 0;
}

struct GenArgs {
    std::string grid;
    std::size_t dim = 0;
    std::string pattern = "blobs";
    std::uint64_t seed = 0;
    std::string output;
    std::string mask;
};

int cmd_gen(const GenArgs& a)
{
    const auto shape = parse_shape(a.grid);
    if (a.dim == 0) throw invalid_spec_error("--dim must be positive");
    const auto g = generate_grid(shape.h, shape.w, a.dim, parse_pattern(a.pattern), a.seed);
    save_grid(g.grid, a.output);
    if (!a.mask.empty()) {
        std::string csv = "row,col,blob\n";
        for (std::size_t r = 0; r < shape.h; ++r) {
            for (std::size_t c = 0; c < shape.w; ++c) {
                csv += std::to_string(r) + "," + std::to_string(c) + "," +
                       (g.blob_mask[r * shape.w + c] ? "1" : "0") + "\n";
            }
        }
        write_text(a.mask, csv);
    }
    return 0;
}

void add_reduce_options(CLI::App* sub, ReduceArgs& a)
{
    sub->add_option("--input", a.input, "input grid file")->required();
    sub->add_option("--rh", a.rh, "tokens removed per column (count, or fraction like 0.25)");
    sub->add_option("--rw", a.rw, "tokens removed per row (count, or fraction like 0.25)");
    sub->add_option("--window", a.window, "reduce inside independent windows of this side");
    sub->add_option("--strategy", a.strategy,
                    "bipartite_local | naive_local | bipartite_global");
    sub->add_option("--repr", a.repr, "max_per_dim | weighted_average | max_vector");
    sub->add_option("--threads", a.threads, "worker threads for per-line matching");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Structured token merging for ViT feature maps"};
    app.require_subcommand(1);

    ReduceArgs reduce_args;
    auto* reduce = app.add_subcommand("reduce", "reduce a grid file");
    add_reduce_options(reduce, reduce_args);
    reduce->add_option("--output", reduce_args.output, "output grid file")->required();
    reduce->add_option("--map", reduce_args.map, "write the merge map as CSV");

    ReduceArgs compare_args;
    std::string k_list;
    auto* compare = app.add_subcommand("compare", "compare strategies and representations");
    add_reduce_options(compare, compare_args);
    compare->add_option("--k-list", k_list,
                        "comma-separated rates applied to both axes; overrides --rh/--rw");
    compare->add_option("--output", compare_args.output, "CSV destination (default stdout)");

    BenchArgs bench_args;
    auto* bench = app.add_subcommand("bench", "time the toy ViT over reduction rates");
    bench->add_option("--depth", bench_args.depth, "transformer blocks");
    bench->add_option("--dim", bench_args.dim, "embedding width");
    bench->add_option("--heads", bench_args.heads, "attention heads");
    bench->add_option("--grid", bench_args.grid, "token grid HxW");
    bench->add_option("--window", bench_args.window, "attention and reduction window side");
    bench->add_option("--layer", bench_args.layer, "block index where reduction runs");
    bench->add_option("--rates", bench_args.rates, "comma-separated r (r_h = r_w)");
    bench->add_option("--repeats", bench_args.repeats, "timed runs per rate (median reported)");
    bench->add_option("--seed", bench_args.seed, "weights and input seed");
    bench->add_option("--strategy", bench_args.strategy, "matching strategy");
    bench->add_option("--repr", bench_args.repr, "merge representation");
    bench->add_option("--pos", bench_args.pos, "rope2d | none");
    bench->add_option("--output", bench_args.output, "CSV destination (default stdout)");
    bench->add_option("--trace", bench_args.trace,
                      "write per-layer JSON lines to PREFIX.r<R>.jsonl");

    GenArgs gen_args;
    auto* gen = app.add_subcommand("gen", "write a synthetic grid file");
    gen->add_option("--grid", gen_args.grid, "HxW")->required();
    gen->add_option("--dim", gen_args.dim, "channels")->required();
    gen->add_option("--pattern", gen_args.pattern, "uniform | blobs | stripes");
    gen->add_option("--seed", gen_args.seed, "generator seed");
    gen->add_option("--output", gen_args.output, "output grid file")->required();
    gen->add_option("--mask", gen_args.mask, "write the blob mask as CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_spec;
    }

    try {
        if (*reduce) return cmd_reduce(reduce_args);
        if (*compare) return cmd_compare(compare_args, k_list);
        if (*bench) return cmd_bench(bench_args);
        if (*gen) return cmd_gen(gen_args);
    } catch (const malformed_file_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_file;
    } catch (const invalid_spec_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_spec;
    } catch (const spatial_incompatibility_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_spec;
    } catch (const dimension_mismatch_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_spec;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_internal;
    }
    return exit_internal;
}
