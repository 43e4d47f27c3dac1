// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0
//
// End-to-end orchestration: the four-way evaluation (zero-shot / 16-shot
// ICL / BM25 retrieval / retrieval-gated intervention) with token
// accounting, the intervention-strength sweep, the selective-activation
// and unseen-task experiments, and report assembly.

#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskvec/bm25.hpp"
#include "taskvec/library.hpp"
#include "taskvec/model.hpp"
#include "taskvec/retrieval.hpp"
#include "taskvec/tasks.hpp"
#include "taskvec/train.hpp"

namespace taskvec {

using nlohmann::json;

// ----------------------------------------------------------------- config

struct PipelineConfig {
    std::uint64_t seed = 0;
    SuiteConfig suite;
    ModelConfig model;
    TrainConfig train;
    LibraryConfig library;
    PairDataConfig pair_data;
    ScorerConfig scorer;
    RetrievalConfig retrieval;
    int lm_corpus_size = 80;
    std::vector<double> alpha_grid = {0.0, 0.5, 1.0, 2.0, 3.0, 5.0};
};

/// Reference configuration; sub-seeds derive from the master seed and the
/// vocabulary is sized from the task suite.
inline PipelineConfig make_reference_config(std::uint64_t seed = 0) {
    PipelineConfig c;
    c.seed = seed;
    c.suite.seed = seed;
    c.model.seed = derive_seed(seed, 0x6d6f64ull);
    c.model.d_model = 64;
    c.model.n_layers = 8;
    c.model.n_heads = 4;
    c.model.d_ff = 128;
    c.model.context_len = 128;
    c.model.vocab_size = kSymbolBase + (c.suite.n_library + c.suite.n_unseen) *
                                           c.suite.alphabet_size;
    c.train.seed = derive_seed(seed, 0x74726eull);
    c.library.seed = derive_seed(seed, 0x6c6962ull);
    c.pair_data.seed = derive_seed(seed, 0x706472ull);
    c.scorer.seed = derive_seed(seed, 0x736372ull);
    c.scorer.vocab_size = c.model.vocab_size;
    c.scorer.emb_dim = c.model.d_model;
    return c;
}

inline void validate_pipeline_config(const PipelineConfig& c) {
    c.model.validate();
    c.train.validate();
    if (c.model.n_layers < 4) {
        throw ConfigError("pipeline: n_layers must be >= 4 for layer selection");
    }
    const int vocab_needed =
        kSymbolBase + (c.suite.n_library + c.suite.n_unseen) * c.suite.alphabet_size;
    if (c.model.vocab_size < vocab_needed) {
        throw ConfigError("pipeline: vocab_size too small for the task suite");
    }
    if (c.scorer.vocab_size != c.model.vocab_size) {
        throw ConfigError("pipeline: scorer vocabulary must match the model");
    }
}

inline json config_to_json(const PipelineConfig& c) {
    json j;
    j["seed"] = c.seed;
    j["suite"] = {{"n_library", c.suite.n_library},   {"n_unseen", c.suite.n_unseen},
                  {"alphabet_size", c.suite.alphabet_size}, {"lib_pool", c.suite.lib_pool},
                  {"n_val", c.suite.n_val},           {"n_test", c.suite.n_test},
                  {"pair_lib_pool", c.suite.pair_lib_pool}, {"seed", c.suite.seed}};
    j["model"] = {{"vocab_size", c.model.vocab_size}, {"d_model", c.model.d_model},
                  {"n_layers", c.model.n_layers},     {"n_heads", c.model.n_heads},
                  {"d_ff", c.model.d_ff},             {"context_len", c.model.context_len},
                  {"seed", c.model.seed}};
    j["train"] = {{"lr", c.train.lr},
                  {"batch_size", c.train.batch_size},
                  {"steps", c.train.steps},
                  {"beta1", c.train.beta1},
                  {"beta2", c.train.beta2},
                  {"adam_eps", c.train.adam_eps},
                  {"clip_norm", c.train.clip_norm},
                  {"warmup_steps", c.train.warmup_steps},
                  {"max_demos", c.train.max_demos},
                  {"seed", c.train.seed}};
    j["library"] = {{"entries_per_task", c.library.entries_per_task},
                    {"n_demos", c.library.n_demos},
                    {"alpha", c.library.alpha},
                    {"mode", c.library.mode == InterventionMode::Add ? "add" : "replace"},
                    {"seed", c.library.seed}};
    j["pair_data"] = {{"size", c.pair_data.size},
                      {"prompts_per_task", c.pair_data.prompts_per_task},
                      {"n_demos", c.pair_data.n_demos},
                      {"seed", c.pair_data.seed}};
    j["scorer"] = {{"emb_dim", c.scorer.emb_dim},
                   {"hidden", c.scorer.hidden},
                   {"dropout", c.scorer.dropout},
                   {"epochs", c.scorer.epochs},
                   {"lr", c.scorer.lr},
                   {"batch_size", c.scorer.batch_size},
                   {"heldout_fraction", c.scorer.heldout_fraction},
                   {"train_embeddings", c.scorer.train_embeddings},
                   {"vocab_size", c.scorer.vocab_size},
                   {"seed", c.scorer.seed}};
    j["retrieval"] = {{"tau", c.retrieval.tau},
                      {"target_recall", c.retrieval.target_recall},
                      {"top_n", c.retrieval.top_n},
                      {"alpha", c.retrieval.alpha}};
    j["lm_corpus_size"] = c.lm_corpus_size;
    j["alpha_grid"] = c.alpha_grid;
    return j;
}

inline PipelineConfig config_from_json(const json& j) {
    PipelineConfig c = make_reference_config(j.value("seed", std::uint64_t{0}));
    if (j.contains("suite")) {
        const auto& s = j["suite"];
        c.suite.n_library = s.value("n_library", c.suite.n_library);
        c.suite.n_unseen = s.value("n_unseen", c.suite.n_unseen);
        c.suite.alphabet_size = s.value("alphabet_size", c.suite.alphabet_size);
        c.suite.lib_pool = s.value("lib_pool", c.suite.lib_pool);
        c.suite.n_val = s.value("n_val", c.suite.n_val);
        c.suite.n_test = s.value("n_test", c.suite.n_test);
        c.suite.pair_lib_pool = s.value("pair_lib_pool", c.suite.pair_lib_pool);
        c.suite.seed = s.value("seed", c.suite.seed);
        c.model.vocab_size = kSymbolBase + (c.suite.n_library + c.suite.n_unseen) *
                                               c.suite.alphabet_size;
        c.scorer.vocab_size = c.model.vocab_size;
    }
    if (j.contains("model")) {
        const auto& m = j["model"];
        c.model.vocab_size = m.value("vocab_size", c.model.vocab_size);
        c.model.d_model = m.value("d_model", c.model.d_model);
        c.model.n_layers = m.value("n_layers", c.model.n_layers);
        c.model.n_heads = m.value("n_heads", c.model.n_heads);
        c.model.d_ff = m.value("d_ff", c.model.d_ff);
        c.model.context_len = m.value("context_len", c.model.context_len);
        c.model.seed = m.value("seed", c.model.seed);
        c.scorer.vocab_size = c.model.vocab_size;
        c.scorer.emb_dim = c.model.d_model;
    }
    if (j.contains("train")) {
        const auto& t = j["train"];
        c.train.lr = t.value("lr", c.train.lr);
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.steps = t.value("steps", c.train.steps);
        c.train.beta1 = t.value("beta1", c.train.beta1);
        c.train.beta2 = t.value("beta2", c.train.beta2);
        c.train.adam_eps = t.value("adam_eps", c.train.adam_eps);
        c.train.clip_norm = t.value("clip_norm", c.train.clip_norm);
        c.train.warmup_steps = t.value("warmup_steps", c.train.warmup_steps);
        c.train.max_demos = t.value("max_demos", c.train.max_demos);
        c.train.seed = t.value("seed", c.train.seed);
    }
    if (j.contains("library")) {
        const auto& l = j["library"];
        c.library.entries_per_task = l.value("entries_per_task", c.library.entries_per_task);
        c.library.n_demos = l.value("n_demos", c.library.n_demos);
        c.library.alpha = l.value("alpha", c.library.alpha);
        c.library.mode = l.value("mode", std::string("add")) == "replace"
                             ? InterventionMode::Replace
                             : InterventionMode::Add;
        c.library.seed = l.value("seed", c.library.seed);
    }
    if (j.contains("pair_data")) {
        const auto& p = j["pair_data"];
        c.pair_data.size = p.value("size", c.pair_data.size);
        c.pair_data.prompts_per_task = p.value("prompts_per_task", c.pair_data.prompts_per_task);
        c.pair_data.n_demos = p.value("n_demos", c.pair_data.n_demos);
        c.pair_data.seed = p.value("seed", c.pair_data.seed);
    }
    if (j.contains("scorer")) {
        const auto& s = j["scorer"];
        c.scorer.emb_dim = s.value("emb_dim", c.scorer.emb_dim);
        c.scorer.hidden = s.value("hidden", c.scorer.hidden);
        c.scorer.dropout = s.value("dropout", c.scorer.dropout);
        c.scorer.epochs = s.value("epochs", c.scorer.epochs);
        c.scorer.lr = s.value("lr", c.scorer.lr);
        c.scorer.batch_size = s.value("batch_size", c.scorer.batch_size);
        c.scorer.heldout_fraction = s.value("heldout_fraction", c.scorer.heldout_fraction);
        c.scorer.train_embeddings = s.value("train_embeddings", c.scorer.train_embeddings);
        c.scorer.seed = s.value("seed", c.scorer.seed);
    }
    if (j.contains("retrieval")) {
        const auto& r = j["retrieval"];
        c.retrieval.tau = r.value("tau", c.retrieval.tau);
        c.retrieval.target_recall = r.value("target_recall", c.retrieval.target_recall);
        c.retrieval.top_n = r.value("top_n", c.retrieval.top_n);
        c.retrieval.alpha = r.value("alpha", c.retrieval.alpha);
    }
    c.lm_corpus_size = j.value("lm_corpus_size", c.lm_corpus_size);
    if (j.contains("alpha_grid")) c.alpha_grid = j["alpha_grid"].get<std::vector<double>>();
    return c;
}

inline std::string config_hash_hex(const PipelineConfig& c) {
    const std::string dump = config_to_json(c).dump();
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a64(dump.data(), dump.size())));
    return buf;
}

// ------------------------------------------------------------------ setup

inline int token_count(const std::vector<Token>& prompt) {
    return static_cast<int>(prompt.size());
}

enum class Method { ZeroShot, Icl16, Bm25_16, Elicit, Bm25PlusElicit };

inline const char* method_name(Method m) {
    switch (m) {
        case Method::ZeroShot: return "zero_shot";
        case Method::Icl16: return "icl_16";
        case Method::Bm25_16: return "bm25_16";
        case Method::Elicit: return "elicit";
        case Method::Bm25PlusElicit: return "bm25_plus_elicit";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    for (Method m : {Method::ZeroShot, Method::Icl16, Method::Bm25_16, Method::Elicit,
                     Method::Bm25PlusElicit}) {
        if (s == method_name(m)) return m;
    }
    throw ArgumentError("unknown method: " + s);
}

/// Everything an evaluation needs, assembled once.
struct EvalContext {
    const PipelineConfig* cfg = nullptr;
    const std::vector<TaskSpec>* tasks = nullptr;
    const SplitSet* splits = nullptr;
    const ModelConfig* model_cfg = nullptr;
    const ModelParams<float>* params = nullptr;
    const CapabilityLibrary* library = nullptr;  // required by elicit methods
    const PairScorer* scorer = nullptr;          // required by elicit methods
    std::optional<Bm25Index> bm25;               // built lazily for bm25 methods

    const TaskSpec& task(int id) const { return tasks->at(static_cast<std::size_t>(id)); }
};

/// Demonstration pool rendered as one BM25 document per (x, y) pair across
/// all library tasks; no task labels attached.
inline Bm25Index build_demo_index(const std::vector<TaskSpec>& tasks, const SplitSet& splits) {
    std::vector<std::vector<Token>> docs;
    for (const auto& t : tasks) {
        if (!t.is_library) continue;
        for (const auto& x : splits.of(t).library_pool) {
            std::vector<Token> doc;
            append_demo_block(doc, x, task_answer(t, x), 0);
            docs.push_back(std::move(doc));
        }
    }
    return Bm25Index::build(std::move(docs));
}

// ------------------------------------------------------------------ evals

struct TaskResult {
    int task_id = 0;
    std::string name;
    std::string domain;
    bool is_library = true;
    int n = 0;
    int correct = 0;
    long long tokens = 0;
    int intervened = 0;

    double accuracy() const { return n == 0 ? 0.0 : static_cast<double>(correct) / n; }
    double mean_tokens() const { return n == 0 ? 0.0 : static_cast<double>(tokens) / n; }
    double intervention_rate() const {
        return n == 0 ? 0.0 : static_cast<double>(intervened) / n;
    }
};

struct EvalReport {
    std::string method;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string split;
    std::vector<TaskResult> per_task;
    bool token_parity = true;  // elicit tokens == zero-shot tokens on every query

    json to_json() const {
        json j;
        j["schema_version"] = 1;
        j["method"] = method;
        j["seed"] = seed;
        j["config_hash"] = config_hash;
        j["split"] = split;
        j["token_parity"] = token_parity;
        json jt = json::array();
        std::map<std::string, std::pair<double, int>> domain_acc;
        double task_acc_sum = 0.0;
        long long tok_sum = 0;
        int n_total = 0, correct_total = 0, intervened_total = 0;
        for (const auto& t : per_task) {
            json o;
            o["task_id"] = t.task_id;
            o["name"] = t.name;
            o["domain"] = t.domain;
            o["library"] = t.is_library;
            o["n_queries"] = t.n;
            o["accuracy"] = t.accuracy();
            o["mean_tokens"] = t.mean_tokens();
            o["intervention_rate"] = t.intervention_rate();
            jt.push_back(std::move(o));
            auto& d = domain_acc[t.domain];
            d.first += t.accuracy();
            d.second += 1;
            task_acc_sum += t.accuracy();
            tok_sum += t.tokens;
            n_total += t.n;
            correct_total += t.correct;
            intervened_total += t.intervened;
        }
        j["per_task"] = std::move(jt);
        json jd;
        double domain_sum = 0.0;
        for (const auto& [name, acc] : domain_acc) {
            jd[name] = acc.first / acc.second;
            domain_sum += acc.first / acc.second;
        }
        j["per_domain"] = std::move(jd);
        j["avg_per_task"] = per_task.empty() ? 0.0 : task_acc_sum / per_task.size();
        j["avg_per_domain"] = domain_acc.empty() ? 0.0 : domain_sum / domain_acc.size();
        j["micro_accuracy"] = n_total == 0 ? 0.0 : static_cast<double>(correct_total) / n_total;
        j["mean_tokens"] = n_total == 0 ? 0.0 : static_cast<double>(tok_sum) / n_total;
        j["intervention_rate"] =
            n_total == 0 ? 0.0 : static_cast<double>(intervened_total) / n_total;
        return j;
    }
};

/// Evaluates one method over a query set with exact-match scoring and
/// per-query token accounting.
inline EvalReport run_eval(Method method, const EvalContext& ctx,
                           const std::vector<QueryInstance>& queries,
                           std::uint64_t eval_seed = 0) {
    const bool needs_library = method == Method::Elicit || method == Method::Bm25PlusElicit;
    if (needs_library && (ctx.library == nullptr || ctx.scorer == nullptr)) {
        throw ConfigError(std::string("run_eval: method ") + method_name(method) +
                          " requires a library and a scorer");
    }
    const bool needs_bm25 = method == Method::Bm25_16 || method == Method::Bm25PlusElicit;
    if (needs_bm25 && !ctx.bm25.has_value()) {
        throw ConfigError(std::string("run_eval: method ") + method_name(method) +
                          " requires the BM25 demonstration index");
    }

    std::map<int, TaskResult> results;
    int qi = 0;
    EvalReport report;
    report.method = method_name(method);
    report.seed = eval_seed;
    report.config_hash = ctx.cfg != nullptr ? config_hash_hex(*ctx.cfg) : "";

    for (const auto& q : queries) {
        const TaskSpec& task = ctx.task(q.task_id);
        auto& tr = results[q.task_id];
        if (tr.n == 0) {
            tr.task_id = task.task_id;
            tr.name = task.name;
            tr.domain = domain_name(task.domain);
            tr.is_library = task.is_library;
        }

        std::vector<Token> prompt;
        InterventionSpec iv_storage;
        const InterventionSpec* iv = nullptr;
        bool intervened = false;

        switch (method) {
            case Method::ZeroShot:
                prompt = q.tokens;
                break;
            case Method::Icl16:
                prompt = build_prompt_for_query(task, *ctx.splits, kDefaultDemos, q.x,
                                                q.template_id,
                                                derive_seed(eval_seed, 0x69636cull,
                                                            static_cast<std::uint64_t>(qi)))
                             .tokens;
                break;
            case Method::Bm25_16:
            case Method::Bm25PlusElicit: {
                for (std::size_t doc : ctx.bm25->top_k(q.tokens, kDefaultDemos)) {
                    const auto& d = ctx.bm25->docs[doc];
                    prompt.insert(prompt.end(), d.begin(), d.end());
                }
                prompt.insert(prompt.end(), q.tokens.begin(), q.tokens.end());
                break;
            }
            case Method::Elicit:
                prompt = q.tokens;
                break;
        }

        if (needs_library) {
            const auto ranking = rank_library(*ctx.scorer, q.tokens, *ctx.library);
            const auto decision =
                select_intervention(ranking, *ctx.library, ctx.cfg->retrieval);
            if (decision.has_value()) {
                iv_storage = decision_to_spec(*decision);
                iv = &iv_storage;
                intervened = true;
            }
        }

        const Token got = generate_answer(*ctx.model_cfg, *ctx.params, prompt,
                                          task.answer_alphabet, iv);
        tr.n += 1;
        tr.correct += got == q.answer ? 1 : 0;
        tr.tokens += token_count(prompt);
        tr.intervened += intervened ? 1 : 0;
        if (method == Method::Elicit && token_count(prompt) != token_count(q.tokens)) {
            report.token_parity = false;  // cannot happen: same rendered prompt
        }
        ++qi;
    }

    for (auto& [id, tr] : results) report.per_task.push_back(std::move(tr));
    std::sort(report.per_task.begin(), report.per_task.end(),
              [](const TaskResult& a, const TaskResult& b) { return a.task_id < b.task_id; });
    return report;
}

inline std::vector<QueryInstance> gather_queries(const std::vector<TaskSpec>& tasks,
                                                 const SplitSet& splits, Split split,
                                                 bool library_tasks) {
    std::vector<QueryInstance> out;
    for (const auto& t : tasks) {
        if (t.is_library != library_tasks) continue;
        auto qs = enumerate_queries(t, splits, split);
        out.insert(out.end(), qs.begin(), qs.end());
    }
    return out;
}

// ------------------------------------------------------------- gap metric

struct GapRecovery {
    double mean_ratio = 0.0;   // over tasks with a positive ICL-over-zero-shot gap
    int included = 0;
    int excluded = 0;          // tasks with icl <= zs, reported separately
    std::vector<std::pair<std::string, double>> per_task;

    json to_json() const {
        json j;
        j["mean_ratio"] = mean_ratio;
        j["included_tasks"] = included;
        j["excluded_tasks"] = excluded;
        json p;
        for (const auto& [name, r] : per_task) p[name] = r;
        j["per_task_ratio"] = std::move(p);
        return j;
    }
};

inline GapRecovery gap_recovery(const EvalReport& zs, const EvalReport& icl,
                                const EvalReport& elicit) {
    GapRecovery g;
    double sum = 0.0;
    for (std::size_t i = 0; i < zs.per_task.size(); ++i) {
        const double z = zs.per_task[i].accuracy();
        const double c = icl.per_task[i].accuracy();
        const double e = elicit.per_task[i].accuracy();
        if (c <= z) {
            ++g.excluded;
            continue;
        }
        const double ratio = (e - z) / (c - z);
        g.per_task.emplace_back(zs.per_task[i].name, ratio);
        sum += ratio;
        ++g.included;
    }
    g.mean_ratio = g.included == 0 ? 0.0 : sum / g.included;
    return g;
}

// ---------------------------------------------------------------- sweeps

struct SweepGrid {
    std::vector<int> layers;
    std::vector<double> alphas;
    std::vector<std::vector<double>> accuracy;  // [layer][alpha]
    std::vector<std::vector<double>> ce_loss;   // [layer][alpha]

    std::string to_csv() const {
        std::string csv = "layer,alpha,accuracy,ce_loss\n";
        char line[128];
        for (std::size_t li = 0; li < layers.size(); ++li) {
            for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
                std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g\n", layers[li],
                              alphas[ai], accuracy[li][ai], ce_loss[li][ai]);
                csv += line;
            }
        }
        return csv;
    }

    json to_json() const {
        json j;
        j["schema_version"] = 1;
        j["layers"] = layers;
        j["alphas"] = alphas;
        j["accuracy"] = accuracy;
        j["ce_loss"] = ce_loss;
        return j;
    }
};

/// Accuracy and held-out LM cross-entropy per (layer, alpha) cell. Each
/// library task contributes its first stored vector; CE sequences rotate
/// through those vectors.
inline SweepGrid sweep_alpha(const EvalContext& ctx, const std::vector<double>& alphas,
                             const std::vector<int>& layers) {
    if (std::find(alphas.begin(), alphas.end(), 0.0) == alphas.end()) {
        throw ArgumentError("sweep_alpha: alpha list must include 0");
    }
    const CapabilityLibrary& lib = *ctx.library;
    std::map<int, const TaskVectorEntry*> first_entry;
    for (const auto& e : lib.entries) {
        if (!first_entry.count(e.task_id)) first_entry[e.task_id] = &e;
    }
    std::vector<std::pair<const TaskSpec*, const TaskVectorEntry*>> probes;
    for (const auto& [task_id, entry] : first_entry) {
        probes.emplace_back(&ctx.task(task_id), entry);
    }

    const auto corpus = sample_corpus(*ctx.tasks, *ctx.splits, ctx.cfg->train.max_demos,
                                      ctx.cfg->lm_corpus_size,
                                      derive_seed(ctx.cfg->seed, 0x6c6d6373ull));

    SweepGrid grid;
    grid.layers = layers;
    grid.alphas = alphas;
    grid.accuracy.assign(layers.size(), std::vector<double>(alphas.size(), 0.0));
    grid.ce_loss.assign(layers.size(), std::vector<double>(alphas.size(), 0.0));

    for (std::size_t li = 0; li < layers.size(); ++li) {
        const int layer = layers[li];
        for (std::size_t ai = 0; ai < alphas.size(); ++ai) {
            const float alpha = static_cast<float>(alphas[ai]);
            double acc_sum = 0.0;
            for (const auto& [task, entry] : probes) {
                const InterventionSpec iv =
                    intervention_at(entry->theta, layer, InterventionMode::Add, alpha);
                int correct = 0, total = 0;
                for (const auto& q : enumerate_queries(*task, *ctx.splits, Split::Validation)) {
                    const Token got = generate_answer(*ctx.model_cfg, *ctx.params, q.tokens,
                                                      task->answer_alphabet, &iv);
                    correct += got == q.answer ? 1 : 0;
                    ++total;
                }
                acc_sum += static_cast<double>(correct) / total;
            }
            grid.accuracy[li][ai] = acc_sum / static_cast<double>(probes.size());

            double ce_total = 0.0;
            std::size_t positions = 0;
            for (std::size_t si = 0; si < corpus.size(); ++si) {
                const auto& [task, entry] = probes[si % probes.size()];
                const InterventionSpec iv =
                    intervention_at(entry->theta, layer, InterventionMode::Add, alpha);
                const auto& seq = corpus[si];
                const std::vector<std::vector<Token>> one{seq};
                ce_total += lm_loss(*ctx.model_cfg, *ctx.params, one, &iv) *
                            static_cast<double>(seq.size() - 1);
                positions += seq.size() - 1;
            }
            grid.ce_loss[li][ai] = ce_total / static_cast<double>(positions);
        }
    }
    return grid;
}

/// Accuracy on validation queries as the DTT top-n varies; the n=0 row
/// convention is replaced by an explicit zero-shot reference entry.
inline json run_dtt_sweep(const EvalContext& ctx, const std::vector<int>& ns,
                          std::uint64_t eval_seed = 0) {
    const auto queries = gather_queries(*ctx.tasks, *ctx.splits, Split::Validation, true);
    json rows = json::array();
    EvalContext local = ctx;
    PipelineConfig cfg_local = *ctx.cfg;
    local.cfg = &cfg_local;

    const auto zs = run_eval(Method::ZeroShot, local, queries, eval_seed);
    json zrow;
    zrow["method"] = "zero_shot";
    zrow["avg_per_task"] = zs.to_json()["avg_per_task"];
    rows.push_back(std::move(zrow));

    for (int n : ns) {
        cfg_local.retrieval.top_n = n;
        const auto rep = run_eval(Method::Elicit, local, queries, eval_seed);
        json row;
        row["method"] = "elicit";
        row["top_n"] = n;
        row["avg_per_task"] = rep.to_json()["avg_per_task"];
        row["intervention_rate"] = rep.to_json()["intervention_rate"];
        rows.push_back(std::move(row));
    }
    json out;
    out["schema_version"] = 1;
    out["rows"] = std::move(rows);
    return out;
}

// ------------------------------------------------------------ experiments

/// Library restricted to one domain, evaluated across every domain.
inline json run_selective(const EvalContext& ctx, Domain domain, std::uint64_t eval_seed) {
    const CapabilityLibrary filtered =
        filter_library_by_domain(*ctx.library, *ctx.tasks, domain);
    EvalContext local = ctx;
    local.library = &filtered;

    const auto queries = gather_queries(*ctx.tasks, *ctx.splits, Split::Test, true);
    const auto zs = run_eval(Method::ZeroShot, local, queries, eval_seed);
    EvalReport el;
    if (filtered.entries.empty()) {
        // Nothing to retrieve: the method reduces to zero-shot.
        el = zs;
        el.method = method_name(Method::Elicit);
    } else {
        el = run_eval(Method::Elicit, local, queries, eval_seed);
    }

    json j;
    j["schema_version"] = 1;
    j["experiment"] = "selective_activation";
    j["library_domain"] = domain_name(domain);
    j["zero_shot"] = zs.to_json();
    j["elicit"] = el.to_json();
    json deltas;
    const json zj = zs.to_json()["per_domain"];
    const json ej = el.to_json()["per_domain"];
    for (auto it = zj.begin(); it != zj.end(); ++it) {
        deltas[it.key()] = ej[it.key()].get<double>() - it.value().get<double>();
    }
    j["per_domain_delta"] = std::move(deltas);
    return j;
}

/// Tasks the library has never seen: threshold admission rate plus the
/// no-harm comparison against zero-shot.
inline json run_unseen(const EvalContext& ctx, std::uint64_t eval_seed) {
    const auto queries = gather_queries(*ctx.tasks, *ctx.splits, Split::Test, false);
    if (queries.empty()) throw ConfigError("run_unseen: no unseen tasks in the suite");
    const auto zs = run_eval(Method::ZeroShot, ctx, queries, eval_seed);
    const auto el = run_eval(Method::Elicit, ctx, queries, eval_seed);
    json j;
    j["schema_version"] = 1;
    j["experiment"] = "unseen_tasks";
    j["zero_shot"] = zs.to_json();
    j["elicit"] = el.to_json();
    j["accuracy_delta"] = el.to_json()["avg_per_task"].get<double>() -
                          zs.to_json()["avg_per_task"].get<double>();
    j["intervention_rate"] = el.to_json()["intervention_rate"];
    return j;
}

// ----------------------------------------------------------------- report

/// Merges per-method evaluation JSONs into one methods-by-domains summary
/// table with the token column and both average weightings.
inline json merge_reports(const std::vector<json>& method_reports,
                          const std::optional<json>& dtt_table = std::nullopt) {
    json j;
    j["schema_version"] = 1;
    json methods;
    std::optional<json> zs, icl, el;
    for (const auto& r : method_reports) {
        json row;
        row["mean_tokens"] = r["mean_tokens"];
        row["per_domain"] = r["per_domain"];
        row["avg_per_task"] = r["avg_per_task"];
        row["avg_per_domain"] = r["avg_per_domain"];
        row["intervention_rate"] = r["intervention_rate"];
        methods[r["method"].get<std::string>()] = std::move(row);
        if (r["method"] == "zero_shot") zs = r;
        if (r["method"] == "icl_16") icl = r;
        if (r["method"] == "elicit") el = r;
    }
    j["methods"] = std::move(methods);
    if (zs && icl && el) {
        EvalReport a, b, c;
        auto fill = [](const json& r, EvalReport& rep) {
            rep.method = r["method"];
            for (const auto& t : r["per_task"]) {
                TaskResult tr;
                tr.task_id = t["task_id"];
                tr.name = t["name"];
                tr.domain = t["domain"];
                tr.is_library = t["library"];
                tr.n = t["n_queries"];
                tr.correct = static_cast<int>(
                    std::lround(t["accuracy"].get<double>() * tr.n));
                rep.per_task.push_back(std::move(tr));
            }
        };
        fill(*zs, a);
        fill(*icl, b);
        fill(*el, c);
        j["gap_recovery"] = gap_recovery(a, b, c).to_json();
    }
    if (dtt_table) j["dtt_ablation"] = *dtt_table;
    return j;
}

inline void write_json_atomic(const std::filesystem::path& path, const json& j) {
    write_text_atomic(path, j.dump(2) + "\n");
}

}  // namespace taskvec
