#pragma once

// Minimal forward-only transformer over token grids: pre-norm blocks with
// multi-head (window) attention, optional axial 2D RoPE and an MLP. Weights
// are seeded pseudo-random; the model exists to exercise spatial machinery
// on reduced grids and to time it.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cubist/error.hpp"
#include "cubist/grid.hpp"
#include "cubist/pipeline.hpp"

namespace cubist {

using RowMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class PosMode { rope2d, none };

inline std::string_view to_string(PosMode m) noexcept
{
    return m == PosMode::rope2d ? "rope2d" : "none";
}

struct WindowShape {
    std::size_t rows = 0;
    std::size_t cols = 0;
    friend bool operator==(const WindowShape&, const WindowShape&) = default;
};

struct AttentionOptions {
    std::size_t heads = 1;
    PosMode pos_mode = PosMode::none;
    double rope_base = 100.0;
    /// Add log(size) of each key to its logits.
    bool proportional = false;
};

struct AttentionWeights {
    RowMatrix query;
    RowMatrix key;
    RowMatrix value;
    RowMatrix output;
};

struct LayerWeights {
    AttentionWeights attention;
    RowMatrix mlp_in;  // d x hidden
    RowMatrix mlp_out; // hidden x d
};

/// Operation counts of one attention call, in multiply-adds.
struct AttentionCost {
    /// QK^T plus PV inside windows: sum over windows of 2 * n^2 * d.
    std::uint64_t quadratic = 0;
    /// Q, K, V and output projections: 4 * N * d^2.
    std::uint64_t linear = 0;
};

namespace detail {

inline RowMatrix seeded_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols)
{
    const float bound = std::sqrt(3.0f / static_cast<float>(rows));
    std::uniform_real_distribution<float> u(-bound, bound);
    RowMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
}

inline Eigen::Map<const RowMatrix> as_matrix(const TokenGrid& g)
{
    return {g.data().data(), static_cast<Eigen::Index>(g.token_count()),
            static_cast<Eigen::Index>(g.dim())};
}

inline Eigen::Map<RowMatrix> as_matrix(TokenGrid& g)
{
    return {g.data().data(), static_cast<Eigen::Index>(g.token_count()),
            static_cast<Eigen::Index>(g.dim())};
}

inline void check_head_dim(std::size_t dim, std::size_t head_dim)
{
    if (head_dim == 0 || dim % head_dim != 0) {
        throw invalid_spec_error("dimension " + std::to_string(dim) +
                                 " is not a multiple of head dim " + std::to_string(head_dim));
    }
    if (head_dim % 4 != 0) {
        throw invalid_spec_error("2D RoPE needs a head dim divisible by 4, got " +
                                 std::to_string(head_dim));
    }
}

} // namespace detail

inline LayerWeights make_layer_weights(std::mt19937_64& rng, std::size_t dim, std::size_t hidden)
{
    LayerWeights w;
    w.attention.query = detail::seeded_matrix(rng, dim, dim);
    w.attention.key = detail::seeded_matrix(rng, dim, dim);
    w.attention.value = detail::seeded_matrix(rng, dim, dim);
    w.attention.output = detail::seeded_matrix(rng, dim, dim);
    w.mlp_in = detail::seeded_matrix(rng, dim, hidden);
    w.mlp_out = detail::seeded_matrix(rng, hidden, dim);
    return w;
}

/// Axial 2D rotary embedding of one vector made of whole heads. In each head the
/// first half rotates with the row coordinate and the second half with the column
/// coordinate; pair j of a half turns by pos * base^(-j / (head_dim / 4)).
inline void rope2d_rotate(std::span<float> vec, std::size_t head_dim, double row, double col,
                          double base)
{
    detail::check_head_dim(vec.size(), head_dim);
    const std::size_t half = head_dim / 2;
    const std::size_t pairs = half / 2;
    for (std::size_t h = 0; h < vec.size(); h += head_dim) {
        for (std::size_t axis = 0; axis < 2; ++axis) {
            const double pos = axis == 0 ? row : col;
            float* x = vec.data() + h + axis * half;
            for (std::size_t j = 0; j < pairs; ++j) {
                const double angle =
                    pos * std::pow(base, -static_cast<double>(j) / static_cast<double>(pairs));
                const double c = std::cos(angle), s = std::sin(angle);
                const double a = x[2 * j], b = x[2 * j + 1];
                x[2 * j] = static_cast<float>(a * c - b * s);
                x[2 * j + 1] = static_cast<float>(a * s + b * c);
            }
        }
    }
}

/// Rotate every token by its own (row, col) grid coordinate.
inline TokenGrid rope2d_apply(const TokenGrid& grid, std::size_t head_dim, double base = 100.0)
{
    detail::check_head_dim(grid.dim(), head_dim);
    TokenGrid out = grid;
    for (std::size_t r = 0; r < grid.height(); ++r)
        for (std::size_t c = 0; c < grid.width(); ++c)
            rope2d_rotate(out.token(r, c), head_dim, static_cast<double>(r),
                          static_cast<double>(c), base);
    return out;
}

/// Precomputed cos/sin for integer coordinates 0..extent-1 along one axis,
/// with the same frequencies as rope2d_rotate.
class RopeTable {
public:
    RopeTable(std::size_t extent, std::size_t head_dim, double base)
        : head_dim_(head_dim), pairs_(head_dim / 4), cos_(extent * pairs_), sin_(extent * pairs_)
    {
        for (std::size_t p = 0; p < extent; ++p) {
            for (std::size_t j = 0; j < pairs_; ++j) {
                const double angle = static_cast<double>(p) *
                                     std::pow(base, -static_cast<double>(j) /
                                                        static_cast<double>(pairs_));
                cos_[p * pairs_ + j] = std::cos(angle);
                sin_[p * pairs_ + j] = std::sin(angle);
            }
        }
    }

    /// Rotate the half starting at `offset` of every head in `vec` by coordinate `pos`.
    void rotate(float* vec, std::size_t dim, std::size_t pos, std::size_t offset) const
    {
        const double* c = cos_.data() + pos * pairs_;
        const double* s = sin_.data() + pos * pairs_;
        for (std::size_t h = 0; h < dim; h += head_dim_) {
            float* x = vec + h + offset;
            for (std::size_t j = 0; j < pairs_; ++j) {
                const double a = x[2 * j], b = x[2 * j + 1];
                x[2 * j] = static_cast<float>(a * c[j] - b * s[j]);
                x[2 * j + 1] = static_cast<float>(a * s[j] + b * c[j]);
            }
        }
    }

private:
    std::size_t head_dim_;
    std::size_t pairs_;
    std::vector<double> cos_;
    std::vector<double> sin_;
};

/// Multi-head softmax attention inside non-overlapping windows (the whole grid
/// when `window` is empty), followed by the output projection. The grid must
/// tile exactly into windows; a layout that does not is rejected with
/// spatial_incompatibility_error.
inline TokenGrid window_attention(const TokenGrid& grid, std::optional<WindowShape> window,
                                  const AttentionWeights& w, const TokenSizeGrid* sizes,
                                  const AttentionOptions& opt, AttentionCost* cost = nullptr)
{
    const std::size_t H = grid.height(), W = grid.width(), d = grid.dim();
    const WindowShape win = window.value_or(WindowShape{H, W});
    if (win.rows == 0 || win.cols == 0 || H % win.rows != 0 || W % win.cols != 0) {
        throw spatial_incompatibility_error(
            "token layout " + std::to_string(H) + "x" + std::to_string(W) +
            " cannot be tiled by " + std::to_string(win.rows) + "x" + std::to_string(win.cols) +
            " attention windows");
    }
    if (opt.heads == 0 || d % opt.heads != 0) {
        throw invalid_spec_error("dimension is not divisible by the head count");
    }
    if (sizes && (sizes->height() != H || sizes->width() != W)) {
        throw invalid_spec_error("size grid does not match the token grid");
    }
    const std::size_t hd = d / opt.heads;
    const auto X = detail::as_matrix(grid);

    RowMatrix Q = X * w.query;
    RowMatrix K = X * w.key;
    const RowMatrix V = X * w.value;
    if (opt.pos_mode == PosMode::rope2d) {
        detail::check_head_dim(d, hd);
        const RopeTable rows(H, hd, opt.rope_base), cols(W, hd, opt.rope_base);
        for (std::size_t i = 0; i < H * W; ++i) {
            rows.rotate(Q.row(i).data(), d, i / W, 0);
            cols.rotate(Q.row(i).data(), d, i % W, hd / 2);
            rows.rotate(K.row(i).data(), d, i / W, 0);
            cols.rotate(K.row(i).data(), d, i % W, hd / 2);
        }
    }

    const std::size_t n = win.rows * win.cols;
    const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
    RowMatrix A(H * W, d);
    std::vector<Eigen::Index> idx(n);
    Eigen::RowVectorXf log_size = Eigen::RowVectorXf::Zero(n);
    RowMatrix Qw(n, d), Kw(n, d), Vw(n, d), S(n, n);

    for (std::size_t wi = 0; wi < H / win.rows; ++wi) {
        for (std::size_t wj = 0; wj < W / win.cols; ++wj) {
            for (std::size_t r = 0; r < win.rows; ++r)
                for (std::size_t c = 0; c < win.cols; ++c)
                    idx[r * win.cols + c] =
                        static_cast<Eigen::Index>((wi * win.rows + r) * W + wj * win.cols + c);
            Qw = Q(idx, Eigen::all);
            Kw = K(idx, Eigen::all);
            Vw = V(idx, Eigen::all);
            if (opt.proportional && sizes) {
                for (std::size_t k = 0; k < n; ++k)
                    log_size[k] = std::log(static_cast<float>(sizes->values()[idx[k]]));
            }
            for (std::size_t h = 0; h < opt.heads; ++h) {
                const auto cols = Eigen::seqN(h * hd, hd);
                S.noalias() = Qw(Eigen::all, cols) * Kw(Eigen::all, cols).transpose();
                S *= scale;
                if (opt.proportional && sizes) S.rowwise() += log_size;
                for (Eigen::Index r = 0; r < S.rows(); ++r) {
                    auto row = S.row(r);
                    row = (row.array() - row.maxCoeff()).exp();
                    row /= row.sum();
                }
                A(idx, cols) = S * Vw(Eigen::all, cols);
            }
        }
    }
    if (cost) {
        cost->quadratic += static_cast<std::uint64_t>(H * W / n) * 2 * n * n * d;
        cost->linear += 4 * static_cast<std::uint64_t>(H * W) * d * d;
    }

    TokenGrid out(H, W, d);
    detail::as_matrix(out).noalias() = A * w.output;
    return out;
}

struct ToyViTConfig {
    std::size_t depth = 12;
    std::size_t dim = 384;
    std::size_t heads = 6;
    std::size_t mlp_ratio = 4;
    /// Attention window side; global attention when empty.
    std::optional<std::uint32_t> window;
    PosMode pos_mode = PosMode::rope2d;
    double rope_base = 100.0;
    /// Applied to the block input of layer `reduction->layer`.
    std::optional<ReductionSpec> reduction;
    bool proportional_attention = false;
    std::uint64_t seed = 0;
    unsigned threads = 1;
};

struct LayerTrace {
    std::size_t layer = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t tokens = 0;
    double ms = 0.0;
    AttentionCost attention;
    /// MLP multiply-adds: 2 * N * d * hidden.
    std::uint64_t mlp = 0;

    std::uint64_t linear_ops() const noexcept { return attention.linear + mlp; }
    std::uint64_t total_ops() const noexcept { return attention.quadratic + linear_ops(); }
};

struct ForwardResult {
    TokenGrid output;
    std::vector<LayerTrace> trace;
    /// Present when a reduction ran.
    std::optional<ReducedGrid> reduction;
    /// True when token sizes were carried through the layers.
    bool size_tracking = false;
};

class ToyViT {
public:
    explicit ToyViT(ToyViTConfig config) : config_(std::move(config))
    {
        if (config_.depth == 0 || config_.dim == 0 || config_.heads == 0 || config_.mlp_ratio == 0) {
            throw invalid_spec_error("depth, dim, heads and mlp ratio must be positive");
        }
        if (config_.dim % config_.heads != 0) {
            throw invalid_spec_error("dim " + std::to_string(config_.dim) +
                                     " is not divisible by " + std::to_string(config_.heads) +
                                     " heads");
        }
        if (config_.pos_mode == PosMode::rope2d) {
            detail::check_head_dim(config_.dim, config_.dim / config_.heads);
        }
        if (config_.reduction && config_.reduction->layer >= config_.depth) {
            throw invalid_spec_error("reduction layer " + std::to_string(config_.reduction->layer) +
                                     " must be < depth " + std::to_string(config_.depth));
        }
        if (config_.window && *config_.window == 0) throw invalid_spec_error("window must be positive");
        std::mt19937_64 rng(config_.seed);
        layers_.reserve(config_.depth);
        for (std::size_t i = 0; i < config_.depth; ++i) {
            layers_.push_back(make_layer_weights(rng, config_.dim, config_.dim * config_.mlp_ratio));
        }
    }

    const ToyViTConfig& config() const noexcept { return config_; }
    const LayerWeights& layer(std::size_t i) const { return layers_.at(i); }

    ForwardResult forward(const TokenGrid& input) const
    {
        using clock = std::chrono::steady_clock;
        if (input.dim() != config_.dim) {
            throw invalid_spec_error("input dim " + std::to_string(input.dim()) +
                                     " does not match model dim " + std::to_string(config_.dim));
        }
        const AttentionOptions opts{config_.heads, config_.pos_mode, config_.rope_base,
                                    config_.proportional_attention};
        std::optional<WindowShape> window;
        if (config_.window) window = WindowShape{*config_.window, *config_.window};

        ForwardResult res{input, {}, std::nullopt, false};
        std::optional<TokenSizeGrid> sizes;
        for (std::size_t l = 0; l < config_.depth; ++l) {
            const auto start = clock::now();
            if (config_.reduction && config_.reduction->layer == l) {
                const auto& spec = *config_.reduction;
                ReduceOptions ro;
                ro.threads = config_.threads;
                ro.sizes = sizes ? &*sizes : nullptr;
                auto reduced = cubist_reduce(res.output, spec, ro);
                if (!reduced.structured && (config_.pos_mode == PosMode::rope2d || window)) {
                    throw spatial_incompatibility_error(
                        "unstructured reduction leaves a flat list of " +
                        std::to_string(reduced.tokens.token_count()) +
                        " tokens with no 2D layout for " +
                        (window ? std::string("window attention") : std::string("2D RoPE")));
                }
                // Windowed reduction shrinks every attention window by the same amount.
                if (window && spec.window && *spec.window == *config_.window) {
                    window = WindowShape{window->rows - reduced.rates.r_h,
                                         window->cols - reduced.rates.r_w};
                }
                res.output = reduced.tokens;
                sizes = reduced.sizes;
                res.size_tracking = sizes.has_value();
                res.reduction = std::move(reduced);
            }
            LayerTrace t;
            t.layer = l;
            t.height = res.output.height();
            t.width = res.output.width();
            t.tokens = res.output.token_count();
            block(res.output, layers_[l], window, sizes ? &*sizes : nullptr, opts, t);
            t.ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
            res.trace.push_back(t);
        }
        return res;
    }

private:
    static void layer_norm(const TokenGrid& in, TokenGrid& out)
    {
        const std::size_t d = in.dim();
        for (std::size_t n = 0; n < in.token_count(); ++n) {
            auto x = in.token(n);
            auto y = out.token(n);
            double mean = 0.0, var = 0.0;
            for (float v : x) mean += v;
            mean /= static_cast<double>(d);
            for (float v : x) var += (v - mean) * (v - mean);
            const double inv = 1.0 / std::sqrt(var / static_cast<double>(d) + 1e-6);
            for (std::size_t i = 0; i < d; ++i) y[i] = static_cast<float>((x[i] - mean) * inv);
        }
    }

    void block(TokenGrid& x, const LayerWeights& w, std::optional<WindowShape> window,
               const TokenSizeGrid* sizes, const AttentionOptions& opts, LayerTrace& t) const
    {
        TokenGrid normed(x.height(), x.width(), x.dim());
        layer_norm(x, normed);
        const TokenGrid attn = window_attention(normed, window, w.attention, sizes, opts, &t.attention);
        auto X = detail::as_matrix(x);
        X += detail::as_matrix(attn);

        layer_norm(x, normed);
        RowMatrix hidden = detail::as_matrix(normed) * w.mlp_in;
        // tanh-approximated GELU
        auto v = hidden.array();
        hidden = 0.5f * v * (1.0f + (0.7978845608f * (v + 0.044715f * v.cube())).tanh());
        X.noalias() += hidden * w.mlp_out;
        t.mlp = 2 * static_cast<std::uint64_t>(x.token_count()) * x.dim() * w.mlp_in.cols();
    }

    ToyViTConfig config_;
    std::vector<LayerWeights> layers_;
};

/// Predicted per-layer op count after reduction from N to N' tokens, given the
/// unreduced layer's quadratic and linear terms.
inline double predicted_ops(double quadratic, double linear, double n_before, double n_after)
{
    const double ratio = n_after / n_before;
    return ratio * ratio * quadratic + ratio * linear;
}

} // namespace cubist
