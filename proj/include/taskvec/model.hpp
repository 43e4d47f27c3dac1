// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0
//
// Minimal decoder-only transformer, templated on the scalar type so the
// same code runs float for the pipeline and double for gradient checks.
// Pre-LN blocks; the residual stream after block l is the hidden state
// h_l, captured before any final normalization. A block contributes
// h_l = h_{l-1} + attn_l + mlp_l, which trace capture exposes directly.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "taskvec/common.hpp"
#include "taskvec/serialize.hpp"
#include "taskvec/tensor.hpp"

namespace taskvec {

struct ModelConfig {
    int vocab_size = 272;
    int d_model = 64;
    int n_layers = 8;
    int n_heads = 4;
    int d_ff = 128;
    int context_len = 128;
    std::uint64_t seed = 0;

    void validate() const {
        if (vocab_size <= 0 || d_model <= 0 || n_layers <= 0 || n_heads <= 0 ||
            d_ff <= 0 || context_len <= 0) {
            throw ConfigError("ModelConfig: all dimensions must be positive");
        }
        if (d_model % n_heads != 0) {
            throw ConfigError("ModelConfig: d_model must be divisible by n_heads");
        }
    }

    bool operator==(const ModelConfig&) const = default;
};

enum class InterventionMode { Add, Replace };

/// Edit applied to the last token's residual state after the named block
/// finishes and before the next block (or the output head) consumes it.
/// Add mode: h + strength * vec. Replace mode: vec.
struct InterventionSpec {
    int layer = 0;
    InterventionMode mode = InterventionMode::Add;
    float strength = 0.0f;
    std::vector<float> vec;
};

template <class S>
struct ModelParams {
    struct Layer {
        Mat<S> ln1_g, ln1_b;
        Mat<S> wq, wk, wv, wo;
        Mat<S> ln2_g, ln2_b;
        Mat<S> w1, b1, w2, b2;
    };

    Mat<S> tok_emb;  // vocab x d
    Mat<S> pos_emb;  // context x d
    std::vector<Layer> layers;
    Mat<S> lnf_g, lnf_b;
    Mat<S> unemb;  // d x vocab

    /// Tensors in declaration order; the order defines the checkpoint
    /// layout and the optimizer state alignment.
    std::vector<Mat<S>*> tensors() {
        std::vector<Mat<S>*> out{&tok_emb, &pos_emb};
        for (auto& l : layers) {
            for (Mat<S>* m : {&l.ln1_g, &l.ln1_b, &l.wq, &l.wk, &l.wv, &l.wo,
                              &l.ln2_g, &l.ln2_b, &l.w1, &l.b1, &l.w2, &l.b2}) {
                out.push_back(m);
            }
        }
        out.push_back(&lnf_g);
        out.push_back(&lnf_b);
        out.push_back(&unemb);
        return out;
    }
    std::vector<const Mat<S>*> tensors() const {
        auto* self = const_cast<ModelParams*>(this);
        auto t = self->tensors();
        return {t.begin(), t.end()};
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto* m : tensors()) n += m->size();
        return n;
    }

    bool all_finite_params() const {
        for (const auto* m : tensors()) {
            if (!all_finite(m->a.data(), m->size())) return false;
        }
        return true;
    }
};

template <class S>
ModelParams<S> init_params(const ModelConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, 0x696e6974ull));
    ModelParams<S> p;
    const double w_sd = 0.05;
    p.tok_emb = randn_mat<S>(cfg.vocab_size, cfg.d_model, rng, 0.05);
    p.pos_emb = randn_mat<S>(cfg.context_len, cfg.d_model, rng, 0.02);
    p.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    // Residual-feeding projections scaled down with depth, GPT-2 style.
    const double o_sd = w_sd / std::sqrt(2.0 * cfg.n_layers);
    for (auto& l : p.layers) {
        l.ln1_g = Mat<S>(1, cfg.d_model);
        l.ln1_b = Mat<S>(1, cfg.d_model);
        l.ln2_g = Mat<S>(1, cfg.d_model);
        l.ln2_b = Mat<S>(1, cfg.d_model);
        std::fill(l.ln1_g.a.begin(), l.ln1_g.a.end(), S(1));
        std::fill(l.ln2_g.a.begin(), l.ln2_g.a.end(), S(1));
        l.wq = randn_mat<S>(cfg.d_model, cfg.d_model, rng, w_sd);
        l.wk = randn_mat<S>(cfg.d_model, cfg.d_model, rng, w_sd);
        l.wv = randn_mat<S>(cfg.d_model, cfg.d_model, rng, w_sd);
        l.wo = randn_mat<S>(cfg.d_model, cfg.d_model, rng, o_sd);
        l.w1 = randn_mat<S>(cfg.d_model, cfg.d_ff, rng, w_sd);
        l.b1 = Mat<S>(1, cfg.d_ff);
        l.w2 = randn_mat<S>(cfg.d_ff, cfg.d_model, rng, o_sd);
        l.b2 = Mat<S>(1, cfg.d_model);
    }
    p.lnf_g = Mat<S>(1, cfg.d_model);
    p.lnf_b = Mat<S>(1, cfg.d_model);
    std::fill(p.lnf_g.a.begin(), p.lnf_g.a.end(), S(1));
    p.unemb = randn_mat<S>(cfg.d_model, cfg.vocab_size, rng, w_sd);
    return p;
}

// ----------------------------------------------------------- activations

constexpr double kLnEps = 1e-5;

template <class S>
void layer_norm_forward(const S* x, int n, int d, const S* g, const S* b, S* y,
                        S* mu_out, S* rstd_out) {
    for (int i = 0; i < n; ++i) {
        const S* xi = x + static_cast<std::size_t>(i) * d;
        S* yi = y + static_cast<std::size_t>(i) * d;
        S mu = S(0);
        for (int j = 0; j < d; ++j) mu += xi[j];
        mu /= S(d);
        S var = S(0);
        for (int j = 0; j < d; ++j) {
            const S c = xi[j] - mu;
            var += c * c;
        }
        var /= S(d);
        const S rstd = S(1) / std::sqrt(var + S(kLnEps));
        for (int j = 0; j < d; ++j) yi[j] = g[j] * ((xi[j] - mu) * rstd) + b[j];
        mu_out[i] = mu;
        rstd_out[i] = rstd;
    }
}

template <class S>
S gelu_inner_tanh(S x) {
    const S c = S(0.7978845608028654);  // sqrt(2/pi)
    return fast_tanh(c * (x + S(0.044715) * x * x * x));
}

template <class S>
S gelu(S x) {
    return S(0.5) * x * (S(1) + gelu_inner_tanh(x));
}

// Derivative given the cached inner tanh value t = gelu_inner_tanh(x).
template <class S>
S gelu_grad_cached(S x, S t) {
    const S c = S(0.7978845608028654);
    const S du = c * (S(1) + S(3) * S(0.044715) * x * x);
    return S(0.5) * (S(1) + t) + S(0.5) * x * (S(1) - t * t) * du;
}

enum class LogitsMode { LastOnly, All };

template <class S>
struct Activations {
    int n = 0;
    Mat<S> x0;
    struct LayerActs {
        Mat<S> x_in;
        std::vector<S> ln1_mu, ln1_rs;
        Mat<S> ln1_out, q, k, v, ctx;
        Mat<S> kt;             // d x n: keys transposed, head blocks stacked
        Mat<S> vh;             // (heads*n) x dh: values in head-major rows
        std::vector<S> probs;  // heads x n x n, only j <= i meaningful
        Mat<S> attn_out;
        Mat<S> x_mid;
        std::vector<S> ln2_mu, ln2_rs;
        Mat<S> ln2_out, mlp_pre, mlp_tanh, mlp_act, mlp_out;
    };
    std::vector<LayerActs> layers;
    Mat<S> x_final;
    std::vector<S> lnf_mu, lnf_rs;
    Mat<S> lnf_out;
    Mat<S> logits;  // n x vocab (All) or 1 x vocab (LastOnly)
};

template <class S>
struct ResidualContributions {
    std::vector<S> h0;  // embedding-stage state of the last token
    Mat<S> attn;        // L x d, row l: a_l at the last token
    Mat<S> mlp;         // L x d, row l: m_l at the last token
};

template <class S>
struct ForwardResult {
    std::vector<S> logits;              // next-token logits at the last position
    std::optional<Mat<S>> trace;        // L x d last-token states, pre-intervention
    std::optional<ResidualContributions<S>> debug;
};

struct ForwardOptions {
    const InterventionSpec* intervention = nullptr;
    bool capture = false;
    bool capture_debug = false;
};

/// Full forward pass retaining activations (training and probes).
/// `trace`/`debug` outputs are optional capture sinks.
template <class S>
void forward_full(const ModelConfig& cfg, const ModelParams<S>& params,
                  const std::vector<Token>& tokens, const ForwardOptions& opts,
                  LogitsMode mode, Activations<S>& acts, Mat<S>* trace,
                  ResidualContributions<S>* debug) {
    const int n = static_cast<int>(tokens.size());
    if (n == 0) throw LengthError("forward: empty token sequence");
    if (n > cfg.context_len) {
        throw LengthError("forward: sequence length " + std::to_string(n) +
                          " exceeds context_len " + std::to_string(cfg.context_len));
    }
    const InterventionSpec* iv = opts.intervention;
    if (iv != nullptr && (iv->layer < 0 || iv->layer >= cfg.n_layers)) {
        throw ArgumentError("intervention layer out of range");
    }
    if (iv != nullptr && static_cast<int>(iv->vec.size()) != cfg.d_model) {
        throw ArgumentError("intervention vector dimension mismatch");
    }
    if (iv != nullptr && !std::isfinite(static_cast<double>(iv->strength))) {
        throw ArgumentError("intervention strength must be finite");
    }

    const int d = cfg.d_model;
    const int H = cfg.n_heads;
    const int dh = d / H;
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));
    const int last = n - 1;

    acts.n = n;
    acts.x0.ensure(n, d);
    for (int i = 0; i < n; ++i) {
        const Token t = tokens[static_cast<std::size_t>(i)];
        if (t >= cfg.vocab_size) throw ArgumentError("token id outside vocabulary");
        const S* e = params.tok_emb.row(t);
        const S* pe = params.pos_emb.row(i);
        S* xi = acts.x0.row(i);
        for (int j = 0; j < d; ++j) xi[j] = e[j] + pe[j];
    }

    if (trace != nullptr) *trace = Mat<S>(cfg.n_layers, d);
    if (debug != nullptr) {
        debug->h0.assign(acts.x0.row(last), acts.x0.row(last) + d);
        debug->attn = Mat<S>(cfg.n_layers, d);
        debug->mlp = Mat<S>(cfg.n_layers, d);
    }

    acts.layers.resize(static_cast<std::size_t>(cfg.n_layers));
    const Mat<S>* prev = &acts.x0;
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto& la = acts.layers[static_cast<std::size_t>(l)];
        const auto& lp = params.layers[static_cast<std::size_t>(l)];
        if (&la.x_in != prev) la.x_in = *prev;

        la.ln1_mu.resize(static_cast<std::size_t>(n));
        la.ln1_rs.resize(static_cast<std::size_t>(n));
        la.ln1_out.ensure(n, d);
        layer_norm_forward(la.x_in.a.data(), n, d, lp.ln1_g.a.data(), lp.ln1_b.a.data(),
                           la.ln1_out.a.data(), la.ln1_mu.data(), la.ln1_rs.data());

        la.q.ensure(n, d);
        la.k.ensure(n, d);
        la.v.ensure(n, d);
        la.q.zero();
        la.k.zero();
        la.v.zero();
        matmul_acc(la.ln1_out.a.data(), n, d, lp.wq.a.data(), d, la.q.a.data());
        matmul_acc(la.ln1_out.a.data(), n, d, lp.wk.a.data(), d, la.k.a.data());
        matmul_acc(la.ln1_out.a.data(), n, d, lp.wv.a.data(), d, la.v.a.data());

        la.kt.ensure(d, n);
        la.vh.ensure(H * n, dh);
        for (int j = 0; j < n; ++j) {
            const S* kj = la.k.row(j);
            const S* vj = la.v.row(j);
            for (int h = 0; h < H; ++h) {
                S* vr = la.vh.row(h * n + j);
                for (int p = 0; p < dh; ++p) {
                    la.kt.at(h * dh + p, j) = kj[h * dh + p];
                    vr[p] = vj[h * dh + p];
                }
            }
        }

        la.probs.resize(static_cast<std::size_t>(H) * n * n);
        la.ctx.ensure(n, d);
        la.ctx.zero();
        for (int h = 0; h < H; ++h) {
            const int off = h * dh;
            const S* kt_h = la.kt.row(h * dh);
            const S* vh_h = la.vh.row(h * n);
            S* probs_h = la.probs.data() + static_cast<std::size_t>(h) * n * n;
            for (int i = 0; i < n; ++i) {
                const S* qi = la.q.row(i) + off;
                S* pr = probs_h + static_cast<std::size_t>(i) * n;
                // Full-row score product; only the causal prefix is used.
                std::fill(pr, pr + n, S(0));
                matmul_acc(qi, 1, dh, kt_h, n, pr);
                S mx = pr[0];
                for (int j = 1; j <= i; ++j) mx = std::max(mx, pr[j]);
                S z = S(0);
                for (int j = 0; j <= i; ++j) {
                    const S e = fast_exp((pr[j] - mx) * inv_sqrt_dh);
                    pr[j] = e;
                    z += e;
                }
                const S inv_z = S(1) / z;
                for (int j = 0; j <= i; ++j) pr[j] *= inv_z;
                S* ci = la.ctx.row(i) + off;
                matmul_acc(pr, 1, i + 1, vh_h, dh, ci);
            }
        }

        la.attn_out.ensure(n, d);
        la.attn_out.zero();
        matmul_acc(la.ctx.a.data(), n, d, lp.wo.a.data(), d, la.attn_out.a.data());

        la.x_mid = la.x_in;
        for (std::size_t i = 0; i < la.x_mid.a.size(); ++i) la.x_mid.a[i] += la.attn_out.a[i];

        la.ln2_mu.resize(static_cast<std::size_t>(n));
        la.ln2_rs.resize(static_cast<std::size_t>(n));
        la.ln2_out.ensure(n, d);
        layer_norm_forward(la.x_mid.a.data(), n, d, lp.ln2_g.a.data(), lp.ln2_b.a.data(),
                           la.ln2_out.a.data(), la.ln2_mu.data(), la.ln2_rs.data());

        la.mlp_pre.ensure(n, cfg.d_ff);
        for (int i = 0; i < n; ++i) {
            S* r = la.mlp_pre.row(i);
            for (int j = 0; j < cfg.d_ff; ++j) r[j] = lp.b1.a[static_cast<std::size_t>(j)];
        }
        matmul_acc(la.ln2_out.a.data(), n, d, lp.w1.a.data(), cfg.d_ff, la.mlp_pre.a.data());
        la.mlp_tanh.ensure(n, cfg.d_ff);
        la.mlp_act.ensure(n, cfg.d_ff);
        for (std::size_t i = 0; i < la.mlp_act.a.size(); ++i) {
            const S t = gelu_inner_tanh(la.mlp_pre.a[i]);
            la.mlp_tanh.a[i] = t;
            la.mlp_act.a[i] = S(0.5) * la.mlp_pre.a[i] * (S(1) + t);
        }

        la.mlp_out.ensure(n, d);
        for (int i = 0; i < n; ++i) {
            S* r = la.mlp_out.row(i);
            for (int j = 0; j < d; ++j) r[j] = lp.b2.a[static_cast<std::size_t>(j)];
        }
        matmul_acc(la.mlp_act.a.data(), n, cfg.d_ff, lp.w2.a.data(), d, la.mlp_out.a.data());

        Mat<S>& out = l + 1 < cfg.n_layers
                          ? acts.layers[static_cast<std::size_t>(l) + 1].x_in
                          : acts.x_final;
        out = la.x_mid;
        for (std::size_t i = 0; i < out.a.size(); ++i) out.a[i] += la.mlp_out.a[i];

        if (!all_finite(out.row(last), static_cast<std::size_t>(d))) {
            throw NumericError("non-finite activation at layer " + std::to_string(l));
        }

        if (trace != nullptr) {
            std::copy(out.row(last), out.row(last) + d, trace->row(l));
        }
        if (debug != nullptr) {
            std::copy(la.attn_out.row(last), la.attn_out.row(last) + d, debug->attn.row(l));
            std::copy(la.mlp_out.row(last), la.mlp_out.row(last) + d, debug->mlp.row(l));
        }

        if (iv != nullptr && iv->layer == l) {
            S* hl = out.row(last);
            if (iv->mode == InterventionMode::Add) {
                for (int j = 0; j < d; ++j) {
                    hl[j] += S(iv->strength) * S(iv->vec[static_cast<std::size_t>(j)]);
                }
            } else {
                for (int j = 0; j < d; ++j) hl[j] = S(iv->vec[static_cast<std::size_t>(j)]);
            }
        }
        prev = &out;
    }

    acts.lnf_mu.resize(static_cast<std::size_t>(n));
    acts.lnf_rs.resize(static_cast<std::size_t>(n));
    acts.lnf_out.ensure(n, d);
    layer_norm_forward(acts.x_final.a.data(), n, d, params.lnf_g.a.data(),
                       params.lnf_b.a.data(), acts.lnf_out.a.data(), acts.lnf_mu.data(),
                       acts.lnf_rs.data());

    if (mode == LogitsMode::All) {
        acts.logits.ensure(n, cfg.vocab_size);
        acts.logits.zero();
        matmul_acc(acts.lnf_out.a.data(), n, d, params.unemb.a.data(), cfg.vocab_size,
                   acts.logits.a.data());
    } else {
        acts.logits.ensure(1, cfg.vocab_size);
        acts.logits.zero();
        matmul_acc(acts.lnf_out.row(last), 1, d, params.unemb.a.data(), cfg.vocab_size,
                   acts.logits.a.data());
    }
}

/// Next-token logits at the last position, with optional state capture
/// and a single-point intervention. Pure in (params, tokens, options).
template <class S>
ForwardResult<S> forward(const ModelConfig& cfg, const ModelParams<S>& params,
                         const std::vector<Token>& tokens,
                         const ForwardOptions& opts = {}) {
    Activations<S> acts;
    Mat<S> trace;
    ResidualContributions<S> debug;
    forward_full(cfg, params, tokens, opts, LogitsMode::LastOnly, acts,
                 opts.capture || opts.capture_debug ? &trace : nullptr,
                 opts.capture_debug ? &debug : nullptr);
    ForwardResult<S> r;
    r.logits.assign(acts.logits.row(0), acts.logits.row(0) + cfg.vocab_size);
    if (opts.capture || opts.capture_debug) r.trace = std::move(trace);
    if (opts.capture_debug) r.debug = std::move(debug);
    return r;
}

/// Greedy single-token answer restricted to the task's answer alphabet.
/// Ties break toward the smallest token id.
template <class S>
Token pick_answer(const std::vector<S>& logits, const std::vector<Token>& answer_alphabet) {
    if (answer_alphabet.empty()) {
        throw ConfigError("generate_answer: empty answer alphabet");
    }
    Token best = answer_alphabet.front();
    S best_v = logits.at(best);
    for (Token t : answer_alphabet) {
        const S v = logits.at(t);
        if (v > best_v || (v == best_v && t < best)) {
            best = t;
            best_v = v;
        }
    }
    return best;
}

template <class S>
Token generate_answer(const ModelConfig& cfg, const ModelParams<S>& params,
                      const std::vector<Token>& prompt_tokens,
                      const std::vector<Token>& answer_alphabet,
                      const InterventionSpec* intervention = nullptr) {
    ForwardOptions opts;
    opts.intervention = intervention;
    const auto r = forward(cfg, params, prompt_tokens, opts);
    return pick_answer(r.logits, answer_alphabet);
}

// ------------------------------------------------------------ checkpoint

constexpr std::array<char, 4> kModelMagic{'E', 'L', 'C', 'T'};

template <class S>
std::vector<std::uint8_t> model_payload(const ModelConfig& cfg, const ModelParams<S>& params) {
    ByteWriter w;
    w.put_u32(static_cast<std::uint32_t>(cfg.vocab_size));
    w.put_u32(static_cast<std::uint32_t>(cfg.d_model));
    w.put_u32(static_cast<std::uint32_t>(cfg.n_layers));
    w.put_u32(static_cast<std::uint32_t>(cfg.n_heads));
    w.put_u32(static_cast<std::uint32_t>(cfg.d_ff));
    w.put_u32(static_cast<std::uint32_t>(cfg.context_len));
    w.put_u64(cfg.seed);
    for (const auto* m : params.tensors()) w.put_mat_f32(*m);
    return std::move(w.buf);
}

/// Payload checksum; doubles as the model fingerprint stored in libraries.
template <class S>
std::uint64_t model_fingerprint(const ModelConfig& cfg, const ModelParams<S>& params) {
    const auto payload = model_payload(cfg, params);
    return fnv1a64(payload.data(), payload.size());
}

template <class S>
std::uint64_t save_model(const std::filesystem::path& path, const ModelConfig& cfg,
                         const ModelParams<S>& params) {
    return save_container(path, kModelMagic, model_payload(cfg, params));
}

struct LoadedModel {
    ModelConfig config;
    ModelParams<float> params;
    std::uint64_t fingerprint = 0;
};

inline LoadedModel load_model(const std::filesystem::path& path) {
    const Container c = load_container(path, kModelMagic);
    ByteReader r(c.payload.data(), c.payload.size());
    LoadedModel m;
    m.config.vocab_size = static_cast<int>(r.get_u32());
    m.config.d_model = static_cast<int>(r.get_u32());
    m.config.n_layers = static_cast<int>(r.get_u32());
    m.config.n_heads = static_cast<int>(r.get_u32());
    m.config.d_ff = static_cast<int>(r.get_u32());
    m.config.context_len = static_cast<int>(r.get_u32());
    m.config.seed = r.get_u64();
    m.config.validate();
    m.params = init_params<float>(m.config);
    for (auto* t : m.params.tensors()) r.get_mat_f32(*t);
    if (!r.exhausted()) throw CorruptionError("trailing bytes in model payload");
    m.fingerprint = c.checksum;
    return m;
}

}  // namespace taskvec
