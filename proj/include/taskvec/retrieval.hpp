// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0
//
// Retrieval gate: a binary pair classifier scores a query against every
// stored prompt, a recall-targeted threshold decides whether to intervene
// at all, and Dynamic Top-K Thresholding majority-votes the layer over the
// top-ranked entries. Also hosts the similarity-baseline ablations.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "taskvec/library.hpp"
#include "taskvec/model.hpp"
#include "taskvec/tasks.hpp"

namespace taskvec {

// -------------------------------------------------------------- pair data

struct PairExample {
    std::vector<Token> query;   // templated zero-shot query
    std::vector<Token> prompt;  // ICL prompt, template 0
    bool same_task = false;
    int query_task = 0;
    int prompt_task = 0;
};

struct PairDataConfig {
    int size = 2000;           // paper-scale default is 10000
    int prompts_per_task = 10;
    int n_demos = kDefaultDemos;
    std::uint64_t seed = 0;
};

/// Balanced positives/negatives per task. Queries come from the validation
/// split (all templates); prompts are template-0 ICL prompts drawn from the
/// same generator the library uses. Negatives pair a query with a uniformly
/// chosen other task's prompt.
inline std::vector<PairExample> build_pair_dataset(const std::vector<TaskSpec>& tasks,
                                                   const SplitSet& splits,
                                                   const PairDataConfig& cfg) {
    std::vector<const TaskSpec*> lib_tasks;
    for (const auto& t : tasks) {
        if (t.is_library) lib_tasks.push_back(&t);
    }
    if (lib_tasks.size() < 2) {
        throw ConfigError("build_pair_dataset: need at least two library tasks");
    }
    for (const TaskSpec* t : lib_tasks) {
        if (splits.of(*t).validation.size() < 2) {
            throw ConfigError("build_pair_dataset: need >= 2 validation examples per task");
        }
    }

    // Prompt pool per task.
    std::vector<std::vector<std::vector<Token>>> prompts(tasks.size());
    for (const TaskSpec* t : lib_tasks) {
        for (int i = 0; i < cfg.prompts_per_task; ++i) {
            prompts[static_cast<std::size_t>(t->task_id)].push_back(
                build_icl_prompt(*t, splits, cfg.n_demos, 0,
                                 derive_seed(cfg.seed, 0x70616972ull,
                                             static_cast<std::uint64_t>(t->task_id) * 0x100ull + i))
                    .tokens);
        }
    }

    const int per_task = cfg.size / (2 * static_cast<int>(lib_tasks.size()));
    if (per_task < 1) throw ConfigError("build_pair_dataset: size too small");

    std::vector<PairExample> out;
    for (std::size_t ti = 0; ti < lib_tasks.size(); ++ti) {
        const TaskSpec& task = *lib_tasks[ti];
        const auto queries = enumerate_queries(task, splits, Split::Validation);
        Rng rng(derive_seed(cfg.seed, 0x70647461ull, static_cast<std::uint64_t>(task.task_id)));
        for (int i = 0; i < per_task; ++i) {
            const auto& q = queries[rng.below(queries.size())];
            PairExample pos;
            pos.query = q.tokens;
            pos.query_task = task.task_id;
            pos.prompt_task = task.task_id;
            const auto& own = prompts[static_cast<std::size_t>(task.task_id)];
            pos.prompt = own[rng.below(own.size())];
            pos.same_task = true;
            out.push_back(std::move(pos));

            const auto& q2 = queries[rng.below(queries.size())];
            std::size_t other = rng.below(lib_tasks.size() - 1);
            if (other >= ti) ++other;
            PairExample neg;
            neg.query = q2.tokens;
            neg.query_task = task.task_id;
            neg.prompt_task = lib_tasks[other]->task_id;
            const auto& theirs = prompts[static_cast<std::size_t>(neg.prompt_task)];
            neg.prompt = theirs[rng.below(theirs.size())];
            neg.same_task = false;
            out.push_back(std::move(neg));
        }
    }
    return out;
}

// ----------------------------------------------------------------- scorer

struct ScorerConfig {
    int vocab_size = 0;
    int emb_dim = 64;
    int hidden = 64;
    float dropout = 0.2f;
    int epochs = 15;
    double lr = 1e-3;
    int batch_size = 32;
    double heldout_fraction = 0.25;
    bool train_embeddings = false;  // frozen pretrained-style encoder by default
    std::uint64_t seed = 0;
};

/// Mean-pooled token embeddings for both sides feed a 2-layer MLP head
/// (ReLU, dropout 0.2 while training) whose sigmoid output is the
/// similarity score. Inference is deterministic (dropout off).
struct PairScorer {
    ScorerConfig config;
    Mat<float> emb;  // vocab x e
    Mat<float> w1;   // 4e x hidden
    Mat<float> b1;   // 1 x hidden
    Mat<float> w2;   // hidden x 1
    Mat<float> b2;   // 1 x 1

    std::vector<Mat<float>*> tensors() { return {&emb, &w1, &b1, &w2, &b2}; }
    std::vector<const Mat<float>*> tensors() const {
        auto* self = const_cast<PairScorer*>(this);
        auto t = self->tensors();
        return {t.begin(), t.end()};
    }
};

inline PairScorer init_scorer(const ScorerConfig& cfg, const Mat<float>* pretrained_emb) {
    if (cfg.vocab_size <= 0) throw ConfigError("ScorerConfig: vocab_size not set");
    Rng rng(derive_seed(cfg.seed, 0x73636f72ull));
    PairScorer s;
    s.config = cfg;
    if (pretrained_emb != nullptr) {
        if (pretrained_emb->rows != cfg.vocab_size || pretrained_emb->cols != cfg.emb_dim) {
            throw ConfigError("init_scorer: embedding shape mismatch");
        }
        s.emb = *pretrained_emb;
    } else {
        s.emb = randn_mat<float>(cfg.vocab_size, cfg.emb_dim, rng, 0.1);
    }
    s.w1 = randn_mat<float>(4 * cfg.emb_dim, cfg.hidden, rng, 0.08);
    s.b1 = Mat<float>(1, cfg.hidden);
    s.w2 = randn_mat<float>(cfg.hidden, 1, rng, 0.08);
    s.b2 = Mat<float>(1, 1);
    return s;
}

namespace detail {

inline void mean_pool(const Mat<float>& emb, const std::vector<Token>& tokens,
                      float* out) {
    const int e = emb.cols;
    std::fill(out, out + e, 0.0f);
    if (tokens.empty()) throw ArgumentError("mean_pool: empty token sequence");
    for (Token t : tokens) {
        const float* r = emb.row(t);
        for (int j = 0; j < e; ++j) out[j] += r[j];
    }
    const float inv = 1.0f / static_cast<float>(tokens.size());
    for (int j = 0; j < e; ++j) out[j] *= inv;
}

inline void pair_features(const float* u, const float* v, int e, float* feat) {
    for (int j = 0; j < e; ++j) feat[j] = u[j];
    for (int j = 0; j < e; ++j) feat[e + j] = v[j];
    for (int j = 0; j < e; ++j) feat[2 * e + j] = std::fabs(u[j] - v[j]);
    for (int j = 0; j < e; ++j) feat[3 * e + j] = u[j] * v[j];
}

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

}  // namespace detail

inline float score_pair(const PairScorer& s, const std::vector<Token>& query,
                        const std::vector<Token>& prompt) {
    const int e = s.config.emb_dim;
    std::vector<float> u(static_cast<std::size_t>(e)), v(static_cast<std::size_t>(e));
    detail::mean_pool(s.emb, query, u.data());
    detail::mean_pool(s.emb, prompt, v.data());
    std::vector<float> feat(static_cast<std::size_t>(4) * e);
    detail::pair_features(u.data(), v.data(), e, feat.data());
    std::vector<float> h(static_cast<std::size_t>(s.config.hidden));
    for (int j = 0; j < s.config.hidden; ++j) h[j] = s.b1.a[static_cast<std::size_t>(j)];
    matmul_acc(feat.data(), 1, 4 * e, s.w1.a.data(), s.config.hidden, h.data());
    float z = s.b2.a[0];
    for (int j = 0; j < s.config.hidden; ++j) {
        z += std::max(0.0f, h[static_cast<std::size_t>(j)]) * s.w2.at(j, 0);
    }
    return detail::sigmoid(z);
}

// --------------------------------------------------------------- pr curve

/// Average precision over (score, label) points; the PR-AUC used both for
/// scorer quality and the similarity-baseline comparison.
inline double pr_auc(std::vector<std::pair<double, bool>> scored) {
    std::size_t positives = 0;
    for (const auto& [s, y] : scored) positives += y ? 1 : 0;
    if (positives == 0 || scored.empty()) return 0.0;
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    double ap = 0.0;
    std::size_t tp = 0;
    std::size_t seen = 0;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        ++seen;
        if (scored[i].second) {
            ++tp;
            // Skip ahead over ties handled piecewise: AP convention sums
            // precision at each positive hit.
            ap += static_cast<double>(tp) / static_cast<double>(seen);
        }
    }
    return ap / static_cast<double>(positives);
}

// ---------------------------------------------------------------- training

struct ScorerTrainReport {
    std::vector<double> epoch_losses;
    double heldout_pr_auc = 0.0;
    std::size_t train_pairs = 0;
    std::size_t heldout_pairs = 0;
};

/// Binary cross-entropy over pair labels, Adam, dropout on the hidden
/// layer. Pairs are shuffled once and a held-out tail is reserved for the
/// reported PR-AUC.
inline ScorerTrainReport train_scorer(PairScorer& s, std::vector<PairExample> pairs) {
    const auto& cfg = s.config;
    Rng rng(derive_seed(cfg.seed, 0x7374726eull));
    rng.shuffle(pairs);
    const std::size_t heldout =
        std::max<std::size_t>(1, static_cast<std::size_t>(pairs.size() * cfg.heldout_fraction));
    if (heldout >= pairs.size()) throw ConfigError("train_scorer: not enough pairs");
    const std::size_t n_train = pairs.size() - heldout;

    const int e = cfg.emb_dim;
    const int hid = cfg.hidden;
    Mat<float> gw1(4 * e, hid), gb1(1, hid), gw2(hid, 1), gb2(1, 1), gemb(s.emb.rows, e);
    Mat<float> mw1(4 * e, hid), mb1(1, hid), mw2(hid, 1), mb2(1, 1), memb(s.emb.rows, e);
    Mat<float> vw1(4 * e, hid), vb1(1, hid), vw2(hid, 1), vb2(1, 1), vemb(s.emb.rows, e);
    int t_step = 0;
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    std::vector<float> u(static_cast<std::size_t>(e)), v(static_cast<std::size_t>(e));
    std::vector<float> feat(static_cast<std::size_t>(4) * e), h(static_cast<std::size_t>(hid)),
        hdrop(static_cast<std::size_t>(hid)), dh(static_cast<std::size_t>(hid)),
        dfeat(static_cast<std::size_t>(4) * e);
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(hid));

    ScorerTrainReport report;
    report.train_pairs = n_train;
    report.heldout_pairs = heldout;

    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i) order[i] = i;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
            const std::size_t stop = std::min(n_train, start + cfg.batch_size);
            gw1.zero();
            gb1.zero();
            gw2.zero();
            gb2.zero();
            if (cfg.train_embeddings) gemb.zero();
            const float inv_batch = 1.0f / static_cast<float>(stop - start);
            for (std::size_t bi = start; bi < stop; ++bi) {
                const PairExample& ex = pairs[order[bi]];
                detail::mean_pool(s.emb, ex.query, u.data());
                detail::mean_pool(s.emb, ex.prompt, v.data());
                detail::pair_features(u.data(), v.data(), e, feat.data());
                for (int j = 0; j < hid; ++j) h[static_cast<std::size_t>(j)] = s.b1.a[static_cast<std::size_t>(j)];
                matmul_acc(feat.data(), 1, 4 * e, s.w1.a.data(), hid, h.data());
                float z = s.b2.a[0];
                for (int j = 0; j < hid; ++j) {
                    const float relu = std::max(0.0f, h[static_cast<std::size_t>(j)]);
                    const bool keep = rng.uniform() >= cfg.dropout;
                    mask[static_cast<std::size_t>(j)] = keep ? 1 : 0;
                    hdrop[static_cast<std::size_t>(j)] =
                        keep ? relu / (1.0f - cfg.dropout) : 0.0f;
                    z += hdrop[static_cast<std::size_t>(j)] * s.w2.at(j, 0);
                }
                const float p = detail::sigmoid(z);
                const float y = ex.same_task ? 1.0f : 0.0f;
                epoch_loss += -(y * std::log(std::max(p, 1e-12f)) +
                                (1.0f - y) * std::log(std::max(1.0f - p, 1e-12f)));

                const float dz = (p - y) * inv_batch;
                gb2.a[0] += dz;
                for (int j = 0; j < hid; ++j) {
                    gw2.at(j, 0) += dz * hdrop[static_cast<std::size_t>(j)];
                    float g = dz * s.w2.at(j, 0);
                    if (mask[static_cast<std::size_t>(j)] == 0 ||
                        h[static_cast<std::size_t>(j)] <= 0.0f) {
                        g = 0.0f;
                    } else {
                        g /= (1.0f - cfg.dropout);
                    }
                    dh[static_cast<std::size_t>(j)] = g;
                    gb1.a[static_cast<std::size_t>(j)] += g;
                }
                matmul_acc_at(feat.data(), 1, 4 * e, dh.data(), hid, gw1.a.data());
                if (cfg.train_embeddings) {
                    std::fill(dfeat.begin(), dfeat.end(), 0.0f);
                    matmul_acc_bt(dh.data(), 1, hid, s.w1.a.data(), 4 * e, dfeat.data());
                    // Back through the pair features into both pooled sides.
                    std::vector<float> du(static_cast<std::size_t>(e)), dv(static_cast<std::size_t>(e));
                    for (int j = 0; j < e; ++j) {
                        const float sgn = u[static_cast<std::size_t>(j)] >= v[static_cast<std::size_t>(j)] ? 1.0f : -1.0f;
                        du[static_cast<std::size_t>(j)] = dfeat[static_cast<std::size_t>(j)] +
                                                          sgn * dfeat[static_cast<std::size_t>(2 * e + j)] +
                                                          v[static_cast<std::size_t>(j)] * dfeat[static_cast<std::size_t>(3 * e + j)];
                        dv[static_cast<std::size_t>(j)] = dfeat[static_cast<std::size_t>(e + j)] -
                                                          sgn * dfeat[static_cast<std::size_t>(2 * e + j)] +
                                                          u[static_cast<std::size_t>(j)] * dfeat[static_cast<std::size_t>(3 * e + j)];
                    }
                    const float qs = 1.0f / static_cast<float>(ex.query.size());
                    for (Token tok : ex.query) axpy(qs, du.data(), gemb.row(tok), e);
                    const float ps = 1.0f / static_cast<float>(ex.prompt.size());
                    for (Token tok : ex.prompt) axpy(ps, dv.data(), gemb.row(tok), e);
                }
            }

            ++t_step;
            const double bc1 = 1.0 - std::pow(beta1, t_step);
            const double bc2 = 1.0 - std::pow(beta2, t_step);
            auto adam = [&](Mat<float>& w, Mat<float>& g, Mat<float>& m, Mat<float>& vv) {
                for (std::size_t i = 0; i < w.a.size(); ++i) {
                    const double gi = g.a[i];
                    m.a[i] = static_cast<float>(beta1 * m.a[i] + (1.0 - beta1) * gi);
                    vv.a[i] = static_cast<float>(beta2 * vv.a[i] + (1.0 - beta2) * gi * gi);
                    const double mhat = m.a[i] / bc1;
                    const double vhat = vv.a[i] / bc2;
                    w.a[i] = static_cast<float>(w.a[i] - cfg.lr * mhat / (std::sqrt(vhat) + eps));
                }
            };
            adam(s.w1, gw1, mw1, vw1);
            adam(s.b1, gb1, mb1, vb1);
            adam(s.w2, gw2, mw2, vw2);
            adam(s.b2, gb2, mb2, vb2);
            if (cfg.train_embeddings) adam(s.emb, gemb, memb, vemb);
        }
        epoch_loss /= static_cast<double>(n_train);
        if (!std::isfinite(epoch_loss)) {
            throw NumericError("scorer training diverged at epoch " + std::to_string(epoch));
        }
        report.epoch_losses.push_back(epoch_loss);
    }

    std::vector<std::pair<double, bool>> scored;
    for (std::size_t i = n_train; i < pairs.size(); ++i) {
        scored.emplace_back(score_pair(s, pairs[i].query, pairs[i].prompt),
                            pairs[i].same_task);
    }
    report.heldout_pr_auc = pr_auc(std::move(scored));
    return report;
}

// ---------------------------------------------------------------- ranking

struct SimilarityRanking {
    std::vector<std::pair<int, float>> items;  // (entry_id, score), descending
};

/// One score per library entry, sorted by score descending with entry_id
/// ascending as the tie-break.
inline SimilarityRanking rank_library(const PairScorer& scorer,
                                      const std::vector<Token>& query,
                                      const CapabilityLibrary& lib) {
    if (lib.entries.empty()) throw ArgumentError("rank_library: empty library");
    SimilarityRanking r;
    r.items.reserve(lib.entries.size());
    for (const auto& e : lib.entries) {
        r.items.emplace_back(e.entry_id, score_pair(scorer, query, e.prompt_tokens));
    }
    std::stable_sort(r.items.begin(), r.items.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    return r;
}

// ------------------------------------------------------------ calibration

struct CalibrationPoint {
    double threshold = 0.0;
    double precision = 0.0;
    double recall = 0.0;
};

struct CalibrationResult {
    double tau = 0.0;
    double target_recall = 0.0;
    double achieved_recall = 0.0;
    double achieved_precision = 0.0;
    double auc = 0.0;
    std::vector<CalibrationPoint> curve;  // one point per candidate threshold
};

/// tau = the largest observed-score threshold whose recall (fraction of
/// positive-labeled queries with top-1 score >= tau) still meets the
/// target. Emits the full PR curve alongside.
inline CalibrationResult calibrate_threshold(const std::vector<std::pair<double, bool>>& top1,
                                             double target_recall = 0.8) {
    if (top1.empty()) throw CalibrationError("calibrate_threshold: no labeled scores");
    std::size_t positives = 0;
    for (const auto& [s, y] : top1) positives += y ? 1 : 0;
    if (positives == 0) throw CalibrationError("calibrate_threshold: no positive labels");
    if (target_recall > 1.0) throw CalibrationError("calibrate_threshold: target > 1");

    std::vector<double> candidates;
    candidates.reserve(top1.size());
    for (const auto& [s, y] : top1) candidates.push_back(s);
    std::sort(candidates.begin(), candidates.end(), std::greater<>());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    CalibrationResult out;
    out.target_recall = target_recall;
    out.auc = pr_auc(top1);
    bool found = false;
    for (double c : candidates) {
        std::size_t tp = 0, fp = 0;
        for (const auto& [s, y] : top1) {
            if (s >= c) (y ? tp : fp) += 1;
        }
        CalibrationPoint pt;
        pt.threshold = c;
        pt.recall = static_cast<double>(tp) / static_cast<double>(positives);
        pt.precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        out.curve.push_back(pt);
        if (!found && pt.recall >= target_recall) {
            // Candidates are visited in descending order, so the first hit
            // is the largest qualifying threshold.
            out.tau = c;
            out.achieved_recall = pt.recall;
            out.achieved_precision = pt.precision;
            found = true;
        }
    }
    if (!found) throw CalibrationError("calibrate_threshold: target recall unreachable");
    return out;
}

inline std::string pr_curve_csv(const CalibrationResult& cal) {
    std::string csv = "threshold,precision,recall\n";
    char line[96];
    for (const auto& p : cal.curve) {
        std::snprintf(line, sizeof(line), "%.9g,%.9g,%.9g\n", p.threshold, p.precision,
                      p.recall);
        csv += line;
    }
    return csv;
}

// --------------------------------------------------------------- DTT gate

struct RetrievalConfig {
    double tau = 0.0;
    double target_recall = 0.8;
    int top_n = 10;
    float alpha = kDefaultAlpha;
};

struct InterventionDecision {
    int layer = 0;
    std::vector<float> vec;
    float alpha = kDefaultAlpha;
    int top1_entry = 0;
    double top1_score = 0.0;
    int votes = 0;
};

/// Dynamic Top-K Thresholding: below-threshold top-1 means no intervention;
/// otherwise the top-n entries majority-vote the layer (ties resolved by
/// the highest-ranked tied entry) and the vector is the mean of theta[l]
/// over the vote winners.
inline std::optional<InterventionDecision> select_intervention(
    const SimilarityRanking& ranking, const CapabilityLibrary& lib,
    const RetrievalConfig& cfg) {
    if (cfg.top_n < 1) throw ConfigError("select_intervention: top_n must be >= 1");
    if (ranking.items.empty()) return std::nullopt;
    const auto& top1 = ranking.items.front();
    if (top1.second < cfg.tau) return std::nullopt;

    const std::size_t n = std::min<std::size_t>(static_cast<std::size_t>(cfg.top_n),
                                                ranking.items.size());
    std::vector<int> votes(static_cast<std::size_t>(lib.n_layers), 0);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = lib.entries.at(static_cast<std::size_t>(ranking.items[i].first));
        votes[static_cast<std::size_t>(e.best_layer)] += 1;
    }
    int best_count = 0;
    for (int c : votes) best_count = std::max(best_count, c);
    int layer = -1;
    for (std::size_t i = 0; i < n && layer < 0; ++i) {
        const auto& e = lib.entries.at(static_cast<std::size_t>(ranking.items[i].first));
        if (votes[static_cast<std::size_t>(e.best_layer)] == best_count) {
            layer = e.best_layer;
        }
    }

    InterventionDecision d;
    d.layer = layer;
    d.alpha = cfg.alpha;
    d.top1_entry = top1.first;
    d.top1_score = top1.second;
    d.votes = best_count;
    d.vec.assign(static_cast<std::size_t>(lib.d_model), 0.0f);
    int contributors = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto& e = lib.entries.at(static_cast<std::size_t>(ranking.items[i].first));
        if (e.best_layer == layer) {
            axpy(1.0f, e.theta.row(layer), d.vec.data(), lib.d_model);
            ++contributors;
        }
    }
    if (contributors == 0) {
        // Unreachable when the layer won the vote; top-1 fallback regardless.
        const auto& e = lib.entries.at(static_cast<std::size_t>(top1.first));
        d.vec.assign(e.theta.row(layer), e.theta.row(layer) + lib.d_model);
    } else {
        const float inv = 1.0f / static_cast<float>(contributors);
        for (auto& x : d.vec) x *= inv;
    }
    return d;
}

inline InterventionSpec decision_to_spec(const InterventionDecision& d) {
    InterventionSpec iv;
    iv.layer = d.layer;
    iv.mode = InterventionMode::Add;
    iv.strength = d.alpha;
    iv.vec = d.vec;
    return iv;
}

// ------------------------------------------------------------- baselines

enum class SimilarityMetric { Cosine, Euclidean };

/// Ablation scorer: similarity between the query's own hidden-state stack
/// and a stored task vector, mapped into [0,1]. Cosine of a zero-norm input
/// is defined as 0.5.
inline double baseline_similarity(const std::vector<float>& query_vec,
                                  const std::vector<float>& theta_vec,
                                  SimilarityMetric metric) {
    if (query_vec.size() != theta_vec.size()) {
        throw ArgumentError("baseline_similarity: dimension mismatch");
    }
    if (metric == SimilarityMetric::Cosine) {
        double qq = 0.0, tt = 0.0, qt = 0.0;
        for (std::size_t i = 0; i < query_vec.size(); ++i) {
            qq += static_cast<double>(query_vec[i]) * query_vec[i];
            tt += static_cast<double>(theta_vec[i]) * theta_vec[i];
            qt += static_cast<double>(query_vec[i]) * theta_vec[i];
        }
        if (qq == 0.0 || tt == 0.0) return 0.5;
        return (1.0 + qt / (std::sqrt(qq) * std::sqrt(tt))) / 2.0;
    }
    double d2 = 0.0;
    for (std::size_t i = 0; i < query_vec.size(); ++i) {
        const double diff = static_cast<double>(query_vec[i]) - theta_vec[i];
        d2 += diff * diff;
    }
    return 1.0 / (1.0 + std::sqrt(d2));
}

// ------------------------------------------------------------------ ERTR

constexpr std::array<char, 4> kScorerMagic{'E', 'R', 'T', 'R'};

inline void save_scorer(const PairScorer& s, const std::filesystem::path& path) {
    ByteWriter w;
    w.put_u32(static_cast<std::uint32_t>(s.config.vocab_size));
    w.put_u32(static_cast<std::uint32_t>(s.config.emb_dim));
    w.put_u32(static_cast<std::uint32_t>(s.config.hidden));
    w.put_f32(s.config.dropout);
    w.put_u8(s.config.train_embeddings ? 1 : 0);
    w.put_u64(s.config.seed);
    for (const auto* m : s.tensors()) w.put_mat_f32(*m);
    save_container(path, kScorerMagic, std::move(w.buf));
}

inline PairScorer load_scorer(const std::filesystem::path& path) {
    const Container c = load_container(path, kScorerMagic);
    ByteReader r(c.payload.data(), c.payload.size());
    ScorerConfig cfg;
    cfg.vocab_size = static_cast<int>(r.get_u32());
    cfg.emb_dim = static_cast<int>(r.get_u32());
    cfg.hidden = static_cast<int>(r.get_u32());
    cfg.dropout = r.get_f32();
    cfg.train_embeddings = r.get_u8() != 0;
    cfg.seed = r.get_u64();
    PairScorer s = init_scorer(cfg, nullptr);
    for (auto* m : s.tensors()) r.get_mat_f32(*m);
    if (!r.exhausted()) throw CorruptionError("trailing bytes in scorer payload");
    return s;
}

}  // namespace taskvec
