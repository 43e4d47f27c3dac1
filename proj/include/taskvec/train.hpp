// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0
//
// Hand-written backward pass for the transformer in model.hpp, Adam with
// global-norm clipping, the base-model training loop, and the language
// modeling loss probe used by the intervention sweeps.

#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "taskvec/model.hpp"
#include "taskvec/tasks.hpp"
#include "taskvec/tensor.hpp"

namespace taskvec {

struct TrainConfig {
    double lr = 1.5e-3;
    int batch_size = 16;
    int steps = 1500;
    double beta1 = 0.9;
    double beta2 = 0.98;
    double adam_eps = 1e-8;
    double clip_norm = 1.0;
    int warmup_steps = 50;
    int max_demos = 16;
    std::uint64_t seed = 0;

    void validate() const {
        if (lr <= 0 || batch_size <= 0 || steps < 0 || beta1 <= 0 || beta2 <= 0 ||
            adam_eps <= 0 || warmup_steps < 0 || max_demos < 0) {
            throw ConfigError("TrainConfig: values must be positive");
        }
        if (clip_norm <= 0) throw ConfigError("TrainConfig: clip_norm must be > 0");
    }
};

template <class S>
ModelParams<S> zero_like(const ModelParams<S>& p) {
    ModelParams<S> g = p;
    for (auto* m : g.tensors()) m->zero();
    return g;
}

namespace detail {

template <class S>
void layer_norm_backward(const S* x, int n, int d, const S* g, const S* mu,
                         const S* rstd, const S* dy, S* dx_acc, S* dg_acc, S* db_acc) {
    for (int i = 0; i < n; ++i) {
        const S* xi = x + static_cast<std::size_t>(i) * d;
        const S* dyi = dy + static_cast<std::size_t>(i) * d;
        S* dxi = dx_acc + static_cast<std::size_t>(i) * d;
        const S m = mu[i];
        const S r = rstd[i];
        S mean_dxh = S(0);
        S mean_dxh_xh = S(0);
        for (int j = 0; j < d; ++j) {
            const S xh = (xi[j] - m) * r;
            const S dxh = dyi[j] * g[j];
            dg_acc[j] += dyi[j] * xh;
            db_acc[j] += dyi[j];
            mean_dxh += dxh;
            mean_dxh_xh += dxh * xh;
        }
        mean_dxh /= S(d);
        mean_dxh_xh /= S(d);
        for (int j = 0; j < d; ++j) {
            const S xh = (xi[j] - m) * r;
            const S dxh = dyi[j] * g[j];
            dxi[j] += r * (dxh - mean_dxh - xh * mean_dxh_xh);
        }
    }
}

}  // namespace detail

/// Scratch tensors reused across backward calls.
template <class S>
struct BackpropBuffers {
    Activations<S> acts;
    Mat<S> dlogits, dlnf_out, dcur, dmid, dln2, dpre, dact;
    Mat<S> dln1, dq, dk, dv, dctx;
    Mat<S> vt;   // d x n transposed values
    Mat<S> kh;   // (heads*n) x dh head-major keys
    Mat<S> dvh;  // (heads*n) x dh head-major value grads
    std::vector<S> dprob, dscore;
};

/// Mean next-token cross-entropy of one sequence plus parameter gradients.
/// Inputs are tokens[0..n-2], targets tokens[1..n-1]; the scale argument
/// lets callers average over a batch.
template <class S>
double backward_sequence(const ModelConfig& cfg, const ModelParams<S>& params,
                         const std::vector<Token>& tokens, double scale,
                         ModelParams<S>& grads, BackpropBuffers<S>& ws) {
    if (tokens.size() < 2) throw ArgumentError("training sequence too short");
    std::vector<Token> inputs(tokens.begin(), tokens.end() - 1);
    Activations<S>& acts = ws.acts;
    forward_full<S>(cfg, params, inputs, {}, LogitsMode::All, acts, nullptr, nullptr);

    const int n = acts.n;
    const int d = cfg.d_model;
    const int H = cfg.n_heads;
    const int dh = d / H;
    const S inv_sqrt_dh = S(1) / std::sqrt(S(dh));
    const int V = cfg.vocab_size;

    // Softmax cross-entropy over every predicting position; the exp pass
    // lands directly in dlogits and is normalized in place.
    ws.dlogits.ensure(n, V);
    Mat<S>& dlogits = ws.dlogits;
    double loss = 0.0;
    const S inv_targets = S(1) / S(n);
    for (int i = 0; i < n; ++i) {
        const S* li = acts.logits.row(i);
        const Token target = tokens[static_cast<std::size_t>(i) + 1];
        S mx = li[0];
        for (int j = 1; j < V; ++j) mx = std::max(mx, li[j]);
        S* dli = dlogits.row(i);
        S z = S(0);
        for (int j = 0; j < V; ++j) {
            const S e = fast_exp(li[j] - mx);
            dli[j] = e;
            z += e;
        }
        loss += static_cast<double>(std::log(z) + mx - li[target]) / n;
        const S w = inv_targets * S(scale) / z;
        for (int j = 0; j < V; ++j) dli[j] *= w;
        dli[target] -= inv_targets * S(scale);
    }

    // Output head.
    ws.dlnf_out.ensure(n, d);
    ws.dlnf_out.zero();
    matmul_acc_at(acts.lnf_out.a.data(), n, d, dlogits.a.data(), V, grads.unemb.a.data());
    matmul_acc_bt(dlogits.a.data(), n, V, params.unemb.a.data(), d, ws.dlnf_out.a.data());

    ws.dcur.ensure(n, d);
    ws.dcur.zero();
    Mat<S>& dcur = ws.dcur;
    detail::layer_norm_backward(acts.x_final.a.data(), n, d, params.lnf_g.a.data(),
                                acts.lnf_mu.data(), acts.lnf_rs.data(), ws.dlnf_out.a.data(),
                                dcur.a.data(), grads.lnf_g.a.data(), grads.lnf_b.a.data());

    ws.dmid.ensure(n, d);
    ws.dln2.ensure(n, d);
    ws.dpre.ensure(n, cfg.d_ff);
    ws.dact.ensure(n, cfg.d_ff);
    ws.dln1.ensure(n, d);
    ws.dq.ensure(n, d);
    ws.dk.ensure(n, d);
    ws.dv.ensure(n, d);
    ws.dctx.ensure(n, d);
    Mat<S>&dmid = ws.dmid, &dln2 = ws.dln2, &dpre = ws.dpre, &dact = ws.dact;
    Mat<S>&dln1 = ws.dln1, &dq = ws.dq, &dk = ws.dk, &dv = ws.dv, &dctx = ws.dctx;
    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const auto& la = acts.layers[static_cast<std::size_t>(l)];
        const auto& lp = params.layers[static_cast<std::size_t>(l)];
        auto& lg = grads.layers[static_cast<std::size_t>(l)];

        // MLP branch: dcur covers both the residual skip and mlp_out.
        matmul_acc_at(la.mlp_act.a.data(), n, cfg.d_ff, dcur.a.data(), d, lg.w2.a.data());
        for (int i = 0; i < n; ++i) {
            const S* r = dcur.row(i);
            for (int j = 0; j < d; ++j) lg.b2.a[static_cast<std::size_t>(j)] += r[j];
        }
        dact.zero();
        matmul_acc_bt(dcur.a.data(), n, d, lp.w2.a.data(), cfg.d_ff, dact.a.data());
        for (std::size_t i = 0; i < dpre.a.size(); ++i) {
            dpre.a[i] = dact.a[i] * gelu_grad_cached(la.mlp_pre.a[i], la.mlp_tanh.a[i]);
        }
        matmul_acc_at(la.ln2_out.a.data(), n, d, dpre.a.data(), cfg.d_ff, lg.w1.a.data());
        for (int i = 0; i < n; ++i) {
            const S* r = dpre.row(i);
            for (int j = 0; j < cfg.d_ff; ++j) lg.b1.a[static_cast<std::size_t>(j)] += r[j];
        }
        dln2.zero();
        matmul_acc_bt(dpre.a.data(), n, cfg.d_ff, lp.w1.a.data(), d, dln2.a.data());

        dmid = dcur;  // residual skip
        detail::layer_norm_backward(la.x_mid.a.data(), n, d, lp.ln2_g.a.data(),
                                    la.ln2_mu.data(), la.ln2_rs.data(), dln2.a.data(),
                                    dmid.a.data(), lg.ln2_g.a.data(), lg.ln2_b.a.data());

        // Attention branch; dmid is also the gradient on attn_out.
        matmul_acc_at(la.ctx.a.data(), n, d, dmid.a.data(), d, lg.wo.a.data());
        dctx.zero();
        matmul_acc_bt(dmid.a.data(), n, d, lp.wo.a.data(), d, dctx.a.data());

        dq.zero();
        dk.zero();
        ws.vt.ensure(d, n);
        ws.kh.ensure(H * n, dh);
        for (int j = 0; j < n; ++j) {
            const S* vj = la.v.row(j);
            const S* kj = la.k.row(j);
            for (int h = 0; h < H; ++h) {
                S* kr = ws.kh.row(h * n + j);
                for (int p = 0; p < dh; ++p) {
                    ws.vt.at(h * dh + p, j) = vj[h * dh + p];
                    kr[p] = kj[h * dh + p];
                }
            }
        }
        ws.dvh.ensure(H * n, dh);
        ws.dvh.zero();
        ws.dprob.resize(static_cast<std::size_t>(n));
        ws.dscore.resize(static_cast<std::size_t>(n));
        std::vector<S>& dprob = ws.dprob;
        std::vector<S>& dscore = ws.dscore;
        for (int h = 0; h < H; ++h) {
            const int off = h * dh;
            const S* probs_h = la.probs.data() + static_cast<std::size_t>(h) * n * n;
            const S* vt_h = ws.vt.row(h * dh);
            const S* kh_h = ws.kh.row(h * n);
            for (int i = 0; i < n; ++i) {
                const S* pr = probs_h + static_cast<std::size_t>(i) * n;
                const S* dci = dctx.row(i) + off;
                const int cols = i + 1;
                std::fill(dprob.begin(), dprob.begin() + n, S(0));
                matmul_acc(dci, 1, dh, vt_h, n, dprob.data());
                S sum_dp_p = S(0);
                for (int j = 0; j < cols; ++j) sum_dp_p += dprob[static_cast<std::size_t>(j)] * pr[j];
                for (int j = 0; j < cols; ++j) {
                    dscore[static_cast<std::size_t>(j)] =
                        pr[j] * (dprob[static_cast<std::size_t>(j)] - sum_dp_p) * inv_sqrt_dh;
                }
                for (int j = 0; j < cols; ++j) {
                    axpy(pr[j], dci, ws.dvh.row(h * n + j), dh);
                }
                S* dqi = dq.row(i) + off;
                const S* qi = la.q.row(i) + off;
                matmul_acc(dscore.data(), 1, cols, kh_h, dh, dqi);
                for (int j = 0; j < cols; ++j) {
                    axpy(dscore[static_cast<std::size_t>(j)], qi, dk.row(j) + off, dh);
                }
            }
        }
        for (int j = 0; j < n; ++j) {
            S* dvj = dv.row(j);
            for (int h = 0; h < H; ++h) {
                const S* dr = ws.dvh.row(h * n + j);
                for (int p = 0; p < dh; ++p) dvj[h * dh + p] = dr[p];
            }
        }

        dln1.zero();
        matmul_acc_at(la.ln1_out.a.data(), n, d, dq.a.data(), d, lg.wq.a.data());
        matmul_acc_at(la.ln1_out.a.data(), n, d, dk.a.data(), d, lg.wk.a.data());
        matmul_acc_at(la.ln1_out.a.data(), n, d, dv.a.data(), d, lg.wv.a.data());
        matmul_acc_bt(dq.a.data(), n, d, lp.wq.a.data(), d, dln1.a.data());
        matmul_acc_bt(dk.a.data(), n, d, lp.wk.a.data(), d, dln1.a.data());
        matmul_acc_bt(dv.a.data(), n, d, lp.wv.a.data(), d, dln1.a.data());

        dcur = dmid;  // residual skip into the block input
        detail::layer_norm_backward(la.x_in.a.data(), n, d, lp.ln1_g.a.data(),
                                    la.ln1_mu.data(), la.ln1_rs.data(), dln1.a.data(),
                                    dcur.a.data(), lg.ln1_g.a.data(), lg.ln1_b.a.data());
    }

    for (int i = 0; i < n; ++i) {
        const Token t = inputs[static_cast<std::size_t>(i)];
        axpy(S(1), dcur.row(i), grads.tok_emb.row(t), d);
        axpy(S(1), dcur.row(i), grads.pos_emb.row(i), d);
    }
    return loss;
}

// ----------------------------------------------------------------- adam

template <class S>
struct Adam {
    std::vector<Mat<S>> m, v;
    int t = 0;

    explicit Adam(ModelParams<S>& p) {
        for (auto* w : p.tensors()) {
            m.emplace_back(w->rows, w->cols);
            v.emplace_back(w->rows, w->cols);
        }
    }

    void step(ModelParams<S>& p, ModelParams<S>& g, const TrainConfig& cfg, double lr) {
        // Global-norm clip.
        double sq = 0.0;
        auto gts = g.tensors();
        for (auto* gt : gts) {
            for (const auto& x : gt->a) sq += static_cast<double>(x) * x;
        }
        const double norm = std::sqrt(sq);
        const double gscale = norm > cfg.clip_norm ? cfg.clip_norm / norm : 1.0;

        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, t);
        const double bc2 = 1.0 - std::pow(cfg.beta2, t);
        auto pts = p.tensors();
        for (std::size_t k = 0; k < pts.size(); ++k) {
            auto& mm = m[k].a;
            auto& vv = v[k].a;
            auto& ww = pts[k]->a;
            const auto& gg = gts[k]->a;
            for (std::size_t i = 0; i < ww.size(); ++i) {
                const double gi = static_cast<double>(gg[i]) * gscale;
                const double mi = cfg.beta1 * mm[i] + (1.0 - cfg.beta1) * gi;
                const double vi = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * gi * gi;
                mm[i] = static_cast<S>(mi);
                vv[i] = static_cast<S>(vi);
                const double mhat = mi / bc1;
                const double vhat = vi / bc2;
                ww[i] = static_cast<S>(ww[i] - lr * mhat / (std::sqrt(vhat) + cfg.adam_eps));
            }
        }
    }
};

// ----------------------------------------------------------------- train

struct TrainResult {
    ModelParams<float> params;
    std::vector<double> losses;
    double val_icl16_accuracy = 0.0;
    double val_zero_shot_accuracy = 0.0;
};

template <class S>
double accuracy_on_queries(const ModelConfig& cfg, const ModelParams<S>& params,
                           const std::vector<TaskSpec>& tasks, const SplitSet& splits,
                           Split split, int n_demos, std::uint64_t seed,
                           bool library_only = true) {
    int correct = 0;
    int total = 0;
    for (const auto& task : tasks) {
        if (library_only && !task.is_library) continue;
        for (const auto& q : enumerate_queries(task, splits, split)) {
            std::vector<Token> prompt_tokens;
            if (n_demos == 0) {
                prompt_tokens = q.tokens;
            } else {
                prompt_tokens = build_prompt_for_query(task, splits, n_demos, q.x,
                                                       q.template_id,
                                                       derive_seed(seed, 0x6576c4ull,
                                                                   static_cast<std::uint64_t>(total)))
                                    .tokens;
            }
            const Token got = generate_answer(cfg, params, prompt_tokens,
                                              task.answer_alphabet);
            correct += got == q.answer ? 1 : 0;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(correct) / total;
}

/// Trains on the family-mixture corpus with a uniform 0..max_demos
/// demonstration curriculum and records 16-shot and zero-shot validation
/// accuracy of the finished model.
inline TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                         const std::vector<TaskSpec>& tasks, const SplitSet& splits,
                         std::vector<double>* loss_log = nullptr) {
    model_cfg.validate();
    cfg.validate();
    TrainResult result;
    result.params = init_params<float>(model_cfg);
    Adam<float> opt(result.params);
    BackpropBuffers<float> ws;
    ModelParams<float> grads = zero_like(result.params);

    for (int step = 0; step < cfg.steps; ++step) {
        for (auto* g : grads.tensors()) g->zero();
        double loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            Rng rng(derive_seed(cfg.seed, 0x62617463ull,
                                static_cast<std::uint64_t>(step) * 0x10000ull + b));
            const auto seq = sample_training_sequence(tasks, splits, cfg.max_demos, rng);
            loss += backward_sequence(model_cfg, result.params, seq,
                                      1.0 / cfg.batch_size, grads, ws);
        }
        loss /= cfg.batch_size;
        if (!std::isfinite(loss)) {
            throw NumericError("training loss diverged at step " + std::to_string(step));
        }
        const double warm = cfg.warmup_steps > 0
                                ? std::min(1.0, (step + 1.0) / cfg.warmup_steps)
                                : 1.0;
        opt.step(result.params, grads, cfg, cfg.lr * warm);
        if (!result.params.all_finite_params()) {
            throw NumericError("non-finite parameter after step " + std::to_string(step));
        }
        result.losses.push_back(loss);
        if (loss_log != nullptr) loss_log->push_back(loss);
    }

    result.val_icl16_accuracy = accuracy_on_queries(model_cfg, result.params, tasks,
                                                    splits, Split::Validation,
                                                    cfg.max_demos, cfg.seed);
    result.val_zero_shot_accuracy = accuracy_on_queries(model_cfg, result.params, tasks,
                                                        splits, Split::Validation, 0,
                                                        cfg.seed);
    return result;
}

// --------------------------------------------------------------- lm loss

/// Mean next-token cross-entropy over all predicting positions of the
/// corpus. An intervention, when present, anchors at each sequence's final
/// input position (the one predicting the answer token), so exactly one
/// prediction per sequence feels it.
template <class S>
double lm_loss(const ModelConfig& cfg, const ModelParams<S>& params,
               const std::vector<std::vector<Token>>& corpus,
               const InterventionSpec* intervention = nullptr) {
    if (corpus.empty()) throw ArgumentError("lm_loss: empty corpus");
    double total = 0.0;
    std::size_t count = 0;
    Activations<S> acts;
    ForwardOptions opts;
    opts.intervention = intervention;
    for (const auto& seq : corpus) {
        if (seq.size() < 2) throw ArgumentError("lm_loss: sequence shorter than 2 tokens");
        std::vector<Token> inputs(seq.begin(), seq.end() - 1);
        forward_full<S>(cfg, params, inputs, opts, LogitsMode::All, acts, nullptr, nullptr);
        const int n = acts.n;
        for (int i = 0; i < n; ++i) {
            const S* li = acts.logits.row(i);
            const Token target = seq[static_cast<std::size_t>(i) + 1];
            S mx = li[0];
            for (int j = 1; j < cfg.vocab_size; ++j) mx = std::max(mx, li[j]);
            S z = S(0);
            for (int j = 0; j < cfg.vocab_size; ++j) z += std::exp(li[j] - mx);
            total += static_cast<double>(std::log(z) + mx - li[target]);
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

}  // namespace taskvec
