#include "automo/mixer.hpp"

#include <cmath>
#include <cstring>

#include "automo/rng.hpp"

namespace automo {

namespace {

constexpr double kLayerNormEps = 1e-6;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

template <typename T>
T gelu(T x) {
    return T(0.5) * x * (T(1) + std::erf(x * T(kInvSqrt2)));
}

template <typename T>
T gelu_grad(T x) {
    const T cdf = T(0.5) * (T(1) + std::erf(x * T(kInvSqrt2)));
    const T pdf = T(kInvSqrt2Pi) * std::exp(T(-0.5) * x * x);
    return cdf + x * pdf;
}

// Enumerates the canonical segments in order. f(name, kind, rows, cols, fan_in).
template <typename F>
void for_each_segment(const MixerConfig &cfg, F &&f) {
    const int c = cfg.hidden_c;
    const int s = cfg.seq_len();
    const int pd = cfg.patch_dim();
    f("embed.weight", ParamKind::weight, c, pd, pd);
    f("embed.bias", ParamKind::bias, c, 1, 0);
    for (int b = 0; b < cfg.num_layers; ++b) {
        const std::string prefix = "block" + std::to_string(b) + ".";
        f(prefix + "token_norm.gain", ParamKind::norm_gain, c, 1, 0);
        f(prefix + "token_norm.bias", ParamKind::norm_bias, c, 1, 0);
        f(prefix + "token_mlp.w1", ParamKind::weight, cfg.mlp_ds, s, s);
        f(prefix + "token_mlp.b1", ParamKind::bias, cfg.mlp_ds, 1, 0);
        f(prefix + "token_mlp.w2", ParamKind::weight, s, cfg.mlp_ds, cfg.mlp_ds);
        f(prefix + "token_mlp.b2", ParamKind::bias, s, 1, 0);
        f(prefix + "channel_norm.gain", ParamKind::norm_gain, c, 1, 0);
        f(prefix + "channel_norm.bias", ParamKind::norm_bias, c, 1, 0);
        f(prefix + "channel_mlp.w1", ParamKind::weight, cfg.mlp_dc, c, c);
        f(prefix + "channel_mlp.b1", ParamKind::bias, cfg.mlp_dc, 1, 0);
        f(prefix + "channel_mlp.w2", ParamKind::weight, c, cfg.mlp_dc, cfg.mlp_dc);
        f(prefix + "channel_mlp.b2", ParamKind::bias, c, 1, 0);
    }
    f("final_norm.gain", ParamKind::norm_gain, c, 1, 0);
    f("final_norm.bias", ParamKind::norm_bias, c, 1, 0);
    f("head.weight", ParamKind::weight, MixerConfig::num_classes, c, c);
    f("head.bias", ParamKind::bias, MixerConfig::num_classes, 1, 0);
}

// Sequential reader over the flat genome, following the canonical order.
struct ParamCursor {
    const float *p;
    std::size_t remaining;

    const float *take(std::size_t n) {
        if (n > remaining) throw std::logic_error("param cursor overrun");
        const float *out = p;
        p += n;
        remaining -= n;
        return out;
    }
};

// Per-block weight views.
struct BlockParams {
    const float *g1, *b1;           // token norm
    const float *wt1, *bt1, *wt2, *bt2;
    const float *g2, *b2;           // channel norm
    const float *wc1, *bc1, *wc2, *bc2;
};

struct MixerParams {
    const float *we, *be;
    std::vector<BlockParams> blocks;
    const float *gf, *bf;
    const float *wh, *bh;
};

MixerParams bind_params(const MixerConfig &cfg, const ParamVector &params) {
    validate(cfg);
    if (params.size() != param_count(cfg))
        throw std::invalid_argument("parameter vector length " + std::to_string(params.size()) +
                                    " does not match config (" +
                                    std::to_string(param_count(cfg)) + " expected)");
    const int c = cfg.hidden_c;
    const int s = cfg.seq_len();
    ParamCursor cur{params.data(), params.size()};
    MixerParams mp;
    mp.we = cur.take(static_cast<std::size_t>(c) * cfg.patch_dim());
    mp.be = cur.take(c);
    mp.blocks.resize(cfg.num_layers);
    for (auto &bp : mp.blocks) {
        bp.g1 = cur.take(c);
        bp.b1 = cur.take(c);
        bp.wt1 = cur.take(static_cast<std::size_t>(cfg.mlp_ds) * s);
        bp.bt1 = cur.take(cfg.mlp_ds);
        bp.wt2 = cur.take(static_cast<std::size_t>(s) * cfg.mlp_ds);
        bp.bt2 = cur.take(s);
        bp.g2 = cur.take(c);
        bp.b2 = cur.take(c);
        bp.wc1 = cur.take(static_cast<std::size_t>(cfg.mlp_dc) * c);
        bp.bc1 = cur.take(cfg.mlp_dc);
        bp.wc2 = cur.take(static_cast<std::size_t>(c) * cfg.mlp_dc);
        bp.bc2 = cur.take(c);
    }
    mp.gf = cur.take(c);
    mp.bf = cur.take(c);
    mp.wh = cur.take(static_cast<std::size_t>(MixerConfig::num_classes) * c);
    mp.bh = cur.take(MixerConfig::num_classes);
    if (cur.remaining != 0) throw std::logic_error("param cursor underrun");
    return mp;
}

// Normalization stats kept for the backward pass: xhat (n x c) and the
// per-row reciprocal of sigma.
template <typename T>
struct NormStash {
    std::vector<T> xhat;
    std::vector<T> inv_sigma;
};

// x: n rows of width c, normalized in place over each row.
template <typename T>
void layer_norm(std::vector<T> &x, int n, int c, const float *gain, const float *bias,
                NormStash<T> *stash) {
    if (stash) {
        stash->xhat.resize(x.size());
        stash->inv_sigma.resize(n);
    }
    for (int i = 0; i < n; ++i) {
        T *row = x.data() + static_cast<std::size_t>(i) * c;
        double mean = 0.0;
        for (int j = 0; j < c; ++j) mean += row[j];
        mean /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var /= c;
        const T inv_sigma = T(1) / static_cast<T>(std::sqrt(var + kLayerNormEps));
        if (stash) stash->inv_sigma[i] = inv_sigma;
        for (int j = 0; j < c; ++j) {
            const T xh = (row[j] - static_cast<T>(mean)) * inv_sigma;
            if (stash) stash->xhat[static_cast<std::size_t>(i) * c + j] = xh;
            row[j] = static_cast<T>(gain[j]) * xh + static_cast<T>(bias[j]);
        }
    }
}

// dL/dy (post-norm, pre-gain applied inside) -> dL/dx, accumulated into dx.
template <typename T>
void layer_norm_backward(const std::vector<T> &dy, const NormStash<T> &stash, int n, int c,
                         const float *gain, std::vector<T> &dx) {
    std::vector<T> g(c);
    for (int i = 0; i < n; ++i) {
        const T *drow = dy.data() + static_cast<std::size_t>(i) * c;
        const T *xh = stash.xhat.data() + static_cast<std::size_t>(i) * c;
        double m1 = 0.0, m2 = 0.0;
        for (int j = 0; j < c; ++j) {
            g[j] = drow[j] * static_cast<T>(gain[j]);
            m1 += g[j];
            m2 += g[j] * xh[j];
        }
        m1 /= c;
        m2 /= c;
        T *out = dx.data() + static_cast<std::size_t>(i) * c;
        for (int j = 0; j < c; ++j)
            out[j] += (g[j] - static_cast<T>(m1) - xh[j] * static_cast<T>(m2)) * stash.inv_sigma[i];
    }
}

// Activations captured during the forward pass, per block.
template <typename T>
struct BlockStash {
    NormStash<T> norm1, norm2;
    std::vector<T> token_pre;    // C x Ds pre-activations
    std::vector<T> channel_pre;  // S x Dc pre-activations
};

template <typename T>
struct ForwardStash {
    std::vector<BlockStash<T>> blocks;
    NormStash<T> final_norm;
};

template <typename T>
std::vector<T> extract_patches(const MixerConfig &cfg, std::span<const T> image) {
    const int k = cfg.patch_size;
    const int grid = cfg.patches_per_side();
    std::vector<T> patches(static_cast<std::size_t>(cfg.seq_len()) * cfg.patch_dim());
    std::size_t w = 0;
    for (int py = 0; py < grid; ++py)
        for (int px = 0; px < grid; ++px)
            for (int iy = 0; iy < k; ++iy)
                for (int ix = 0; ix < k; ++ix)
                    patches[w++] = image[static_cast<std::size_t>(py * k + iy) * cfg.image_side +
                                         (px * k + ix)];
    return patches;
}

// y[i] = W[i,:] . x + b[i], W row-major (rows x cols)
template <typename T>
void affine(const float *w, const float *b, const T *x, int rows, int cols, T *y) {
    for (int i = 0; i < rows; ++i) {
        const float *wr = w + static_cast<std::size_t>(i) * cols;
        double acc = b ? b[i] : 0.0;
        for (int j = 0; j < cols; ++j) acc += static_cast<double>(wr[j]) * x[j];
        y[i] = static_cast<T>(acc);
    }
}

// y[j] += W[:,j]^T . d  (transpose product for the backward pass)
template <typename T>
void affine_transpose_acc(const float *w, const T *d, int rows, int cols, T *y) {
    for (int i = 0; i < rows; ++i) {
        const float *wr = w + static_cast<std::size_t>(i) * cols;
        const T di = d[i];
        for (int j = 0; j < cols; ++j) y[j] += static_cast<T>(wr[j]) * di;
    }
}

template <typename T>
std::array<T, 2> run_forward(const MixerConfig &cfg, const MixerParams &mp,
                             std::span<const T> image, std::vector<T> &x_out,
                             ForwardStash<T> *stash) {
    const int s = cfg.seq_len();
    const int c = cfg.hidden_c;
    const auto patches = extract_patches(cfg, image);

    // patch embedding
    std::vector<T> x(static_cast<std::size_t>(s) * c);
    for (int i = 0; i < s; ++i)
        affine(mp.we, mp.be, patches.data() + static_cast<std::size_t>(i) * cfg.patch_dim(), c,
               cfg.patch_dim(), x.data() + static_cast<std::size_t>(i) * c);

    if (stash) stash->blocks.resize(cfg.num_layers);

    std::vector<T> u, h(std::max(cfg.mlp_ds, cfg.mlp_dc)), a(std::max(cfg.mlp_ds, cfg.mlp_dc));
    std::vector<T> col(s), out_col(s);
    for (int b = 0; b < cfg.num_layers; ++b) {
        const BlockParams &bp = mp.blocks[b];
        BlockStash<T> *bs = stash ? &stash->blocks[b] : nullptr;

        // token mixing
        u = x;
        layer_norm(u, s, c, bp.g1, bp.b1, bs ? &bs->norm1 : nullptr);
        if (bs) bs->token_pre.resize(static_cast<std::size_t>(c) * cfg.mlp_ds);
        for (int ch = 0; ch < c; ++ch) {
            for (int i = 0; i < s; ++i) col[i] = u[static_cast<std::size_t>(i) * c + ch];
            affine(bp.wt1, bp.bt1, col.data(), cfg.mlp_ds, s, h.data());
            for (int j = 0; j < cfg.mlp_ds; ++j) {
                if (bs) bs->token_pre[static_cast<std::size_t>(ch) * cfg.mlp_ds + j] = h[j];
                a[j] = gelu(h[j]);
            }
            affine(bp.wt2, bp.bt2, a.data(), s, cfg.mlp_ds, out_col.data());
            for (int i = 0; i < s; ++i) x[static_cast<std::size_t>(i) * c + ch] += out_col[i];
        }

        // channel mixing
        u = x;
        layer_norm(u, s, c, bp.g2, bp.b2, bs ? &bs->norm2 : nullptr);
        if (bs) bs->channel_pre.resize(static_cast<std::size_t>(s) * cfg.mlp_dc);
        for (int i = 0; i < s; ++i) {
            const T *row = u.data() + static_cast<std::size_t>(i) * c;
            affine(bp.wc1, bp.bc1, row, cfg.mlp_dc, c, h.data());
            for (int j = 0; j < cfg.mlp_dc; ++j) {
                if (bs) bs->channel_pre[static_cast<std::size_t>(i) * cfg.mlp_dc + j] = h[j];
                a[j] = gelu(h[j]);
            }
            T *xrow = x.data() + static_cast<std::size_t>(i) * c;
            const float *w2 = bp.wc2;
            for (int ch = 0; ch < c; ++ch) {
                const float *wr = w2 + static_cast<std::size_t>(ch) * cfg.mlp_dc;
                double acc = bp.bc2[ch];
                for (int j = 0; j < cfg.mlp_dc; ++j) acc += static_cast<double>(wr[j]) * a[j];
                xrow[ch] += static_cast<T>(acc);
            }
        }
    }

    layer_norm(x, s, c, mp.gf, mp.bf, stash ? &stash->final_norm : nullptr);

    // mean pool over patches, then the linear head
    std::vector<T> pooled(c, T(0));
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < c; ++j) pooled[j] += x[static_cast<std::size_t>(i) * c + j];
    for (int j = 0; j < c; ++j) pooled[j] /= T(s);

    std::array<T, 2> logits;
    affine(mp.wh, mp.bh, pooled.data(), 2, c, logits.data());
    x_out = std::move(x);
    return logits;
}

std::array<double, 2> softmax2(double l1, double l2) {
    const double m = std::max(l1, l2);
    const double e1 = std::exp(l1 - m);
    const double e2 = std::exp(l2 - m);
    const double p1 = e1 / (e1 + e2);
    return {p1, 1.0 - p1};
}

template <typename T>
std::array<double, 2> checked_probs(const std::array<T, 2> &logits) {
    if (!std::isfinite(static_cast<double>(logits[0])) ||
        !std::isfinite(static_cast<double>(logits[1])))
        throw EvaluationError("non-finite activation in forward pass");
    return softmax2(static_cast<double>(logits[0]), static_cast<double>(logits[1]));
}

// Full backward pass from a logit-space gradient to the input pixels.
template <typename T>
std::vector<T> run_backward(const MixerConfig &cfg, const MixerParams &mp,
                            const ForwardStash<T> &stash, std::array<T, 2> dlogits) {
    const int s = cfg.seq_len();
    const int c = cfg.hidden_c;

    // head and mean pool
    std::vector<T> dpooled(c, T(0));
    affine_transpose_acc(mp.wh, dlogits.data(), 2, c, dpooled.data());
    std::vector<T> dx(static_cast<std::size_t>(s) * c);
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < c; ++j)
            dx[static_cast<std::size_t>(i) * c + j] = dpooled[j] / T(s);

    // final norm
    std::vector<T> tmp(static_cast<std::size_t>(s) * c, T(0));
    layer_norm_backward(dx, stash.final_norm, s, c, mp.gf, tmp);
    dx.swap(tmp);

    std::vector<T> du(static_cast<std::size_t>(s) * c);
    std::vector<T> dh(std::max(cfg.mlp_ds, cfg.mlp_dc));
    std::vector<T> dcol(s);
    for (int b = cfg.num_layers - 1; b >= 0; --b) {
        const BlockParams &bp = mp.blocks[b];
        const BlockStash<T> &bs = stash.blocks[b];

        // channel mixing: x2 = x1 + W2 gelu(W1 norm2(x1) + b1) + b2
        std::fill(du.begin(), du.end(), T(0));
        for (int i = 0; i < s; ++i) {
            const T *drow = dx.data() + static_cast<std::size_t>(i) * c;
            const T *pre = bs.channel_pre.data() + static_cast<std::size_t>(i) * cfg.mlp_dc;
            for (int j = 0; j < cfg.mlp_dc; ++j) {
                double acc = 0.0;
                for (int ch = 0; ch < c; ++ch)
                    acc += static_cast<double>(bp.wc2[static_cast<std::size_t>(ch) * cfg.mlp_dc + j]) *
                           drow[ch];
                dh[j] = static_cast<T>(acc) * gelu_grad(pre[j]);
            }
            affine_transpose_acc(bp.wc1, dh.data(), cfg.mlp_dc, c,
                                 du.data() + static_cast<std::size_t>(i) * c);
        }
        layer_norm_backward(du, bs.norm2, s, c, bp.g2, dx);  // skip path keeps dx

        // token mixing: x1 = x0 + per-channel MLP over norm1(x0) columns
        std::fill(du.begin(), du.end(), T(0));
        for (int ch = 0; ch < c; ++ch) {
            for (int i = 0; i < s; ++i) dcol[i] = dx[static_cast<std::size_t>(i) * c + ch];
            const T *pre = bs.token_pre.data() + static_cast<std::size_t>(ch) * cfg.mlp_ds;
            for (int j = 0; j < cfg.mlp_ds; ++j) {
                double acc = 0.0;
                for (int i = 0; i < s; ++i)
                    acc += static_cast<double>(bp.wt2[static_cast<std::size_t>(i) * cfg.mlp_ds + j]) *
                           dcol[i];
                dh[j] = static_cast<T>(acc) * gelu_grad(pre[j]);
            }
            for (int j = 0; j < cfg.mlp_ds; ++j) {
                const float *wr = bp.wt1 + static_cast<std::size_t>(j) * s;
                const T dj = dh[j];
                for (int i = 0; i < s; ++i)
                    du[static_cast<std::size_t>(i) * c + ch] += static_cast<T>(wr[i]) * dj;
            }
        }
        layer_norm_backward(du, bs.norm1, s, c, bp.g1, dx);
    }

    // embedding: dpatch = We^T dx, scattered back onto the pixel grid
    const int k = cfg.patch_size;
    const int grid = cfg.patches_per_side();
    std::vector<T> dimage(static_cast<std::size_t>(cfg.image_side) * cfg.image_side, T(0));
    std::vector<T> dpatch(cfg.patch_dim());
    for (int py = 0; py < grid; ++py)
        for (int px = 0; px < grid; ++px) {
            const int idx = py * grid + px;
            std::fill(dpatch.begin(), dpatch.end(), T(0));
            affine_transpose_acc(mp.we, dx.data() + static_cast<std::size_t>(idx) * c, c,
                                 cfg.patch_dim(), dpatch.data());
            for (int iy = 0; iy < k; ++iy)
                for (int ix = 0; ix < k; ++ix)
                    dimage[static_cast<std::size_t>(py * k + iy) * cfg.image_side + (px * k + ix)] =
                        dpatch[static_cast<std::size_t>(iy) * k + ix];
        }
    return dimage;
}

void check_image(const MixerConfig &cfg, std::size_t n) {
    const auto want = static_cast<std::size_t>(cfg.image_side) * cfg.image_side;
    if (n != want)
        throw std::invalid_argument("image has " + std::to_string(n) + " pixels, config expects " +
                                    std::to_string(want));
}

void check_label(int label) {
    if (label != 1 && label != 2)
        throw std::invalid_argument("label must be 1 or 2, got " + std::to_string(label));
}

}  // namespace

void validate(const MixerConfig &cfg) {
    if (cfg.image_side < 1 || cfg.patch_size < 1)
        throw std::invalid_argument("image_side and patch_size must be positive");
    if (cfg.image_side % cfg.patch_size != 0)
        throw std::invalid_argument("patch_size " + std::to_string(cfg.patch_size) +
                                    " does not divide image_side " +
                                    std::to_string(cfg.image_side));
    if (cfg.num_layers < 0) throw std::invalid_argument("num_layers must be >= 0");
    if (cfg.hidden_c < 1 || cfg.mlp_ds < 1 || cfg.mlp_dc < 1)
        throw std::invalid_argument("all widths must be >= 1");
}

std::vector<ParamSegment> param_layout(const MixerConfig &cfg) {
    validate(cfg);
    std::vector<ParamSegment> segs;
    std::size_t offset = 0;
    for_each_segment(cfg, [&](const std::string &name, ParamKind kind, int rows, int cols,
                              int fan_in) {
        ParamSegment seg{name, kind, offset, rows, cols, fan_in};
        offset += seg.count();
        segs.push_back(std::move(seg));
    });
    return segs;
}

std::size_t param_count(const MixerConfig &cfg) {
    validate(cfg);
    std::size_t total = 0;
    for_each_segment(cfg, [&](const std::string &, ParamKind, int rows, int cols, int) {
        total += static_cast<std::size_t>(rows) * cols;
    });
    return total;
}

ParamVector init_params(const MixerConfig &cfg, std::uint64_t seed) {
    ParamVector out;
    out.values.reserve(param_count(cfg));
    Rng rng(seed);
    for_each_segment(cfg, [&](const std::string &, ParamKind kind, int rows, int cols,
                              int fan_in) {
        const std::size_t n = static_cast<std::size_t>(rows) * cols;
        switch (kind) {
            case ParamKind::weight: {
                const double bound = std::sqrt(3.0 / fan_in);
                for (std::size_t i = 0; i < n; ++i)
                    out.values.push_back(static_cast<float>(rng.uniform(-bound, bound)));
                break;
            }
            case ParamKind::norm_gain:
                out.values.insert(out.values.end(), n, 1.0f);
                break;
            case ParamKind::bias:
            case ParamKind::norm_bias:
                out.values.insert(out.values.end(), n, 0.0f);
                break;
        }
    });
    return out;
}

ProbPair forward(const MixerConfig &cfg, const ParamVector &params,
                 std::span<const float> image) {
    check_image(cfg, image.size());
    const auto mp = bind_params(cfg, params);
    std::vector<float> x;
    const auto logits = run_forward<float>(cfg, mp, image, x, nullptr);
    const auto p = checked_probs(logits);
    return {p[0], p[1]};
}

std::array<double, 2> forward_probs_f64(const MixerConfig &cfg, const ParamVector &params,
                                        std::span<const double> image) {
    check_image(cfg, image.size());
    const auto mp = bind_params(cfg, params);
    std::vector<double> x;
    const auto logits = run_forward<double>(cfg, mp, image, x, nullptr);
    return checked_probs(logits);
}

std::vector<float> input_gradient(const MixerConfig &cfg, const ParamVector &params,
                                  std::span<const float> image, int true_label) {
    check_image(cfg, image.size());
    check_label(true_label);
    const auto mp = bind_params(cfg, params);
    ForwardStash<float> stash;
    std::vector<float> x;
    const auto logits = run_forward<float>(cfg, mp, image, x, &stash);
    const auto p = checked_probs(logits);
    // d(-log p_y)/d logits = p - onehot(y)
    std::array<float, 2> dlogits{static_cast<float>(p[0]), static_cast<float>(p[1])};
    dlogits[true_label - 1] -= 1.0f;
    return run_backward(cfg, mp, stash, dlogits);
}

ProbGradResult prob_gradient(const MixerConfig &cfg, const ParamVector &params,
                             std::span<const float> image, int cls) {
    check_image(cfg, image.size());
    check_label(cls);
    const auto mp = bind_params(cfg, params);
    ForwardStash<float> stash;
    std::vector<float> x;
    const auto logits = run_forward<float>(cfg, mp, image, x, &stash);
    const auto p = checked_probs(logits);
    // d p_c / d logit_k = p_c (delta_ck - p_k)
    const double pc = p[cls - 1];
    std::array<float, 2> dlogits{static_cast<float>(pc * ((cls == 1 ? 1.0 : 0.0) - p[0])),
                                 static_cast<float>(pc * ((cls == 2 ? 1.0 : 0.0) - p[1]))};
    ProbGradResult res;
    res.probs = {p[0], p[1]};
    res.grad = run_backward(cfg, mp, stash, dlogits);
    return res;
}

}  // namespace automo
