// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0
//
// Capability library: per-prompt task vectors (the full stack of last-token
// hidden states), each paired with the intervention layer that maximizes
// validation accuracy, persisted in the ELIB container.

#pragma once

#include <algorithm>
#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "taskvec/model.hpp"
#include "taskvec/tasks.hpp"

namespace taskvec {

constexpr float kDefaultAlpha = 2.0f;
constexpr int kDefaultEntriesPerTask = 10;
constexpr int kDefaultDemos = 16;

struct TaskVectorEntry {
    int entry_id = 0;
    int task_id = 0;
    std::vector<Token> prompt_tokens;  // rendered source prompt, template 0
    Mat<float> theta;                  // L x d
    int best_layer = 0;
    float val_accuracy = 0.0f;
};

struct LibraryConfig {
    int entries_per_task = kDefaultEntriesPerTask;  // k
    int n_demos = kDefaultDemos;                    // N
    float alpha = kDefaultAlpha;
    InterventionMode mode = InterventionMode::Add;
    std::uint64_t seed = 0;
};

struct CapabilityLibrary {
    std::uint64_t model_fingerprint = 0;
    LibraryConfig config;
    int n_tasks = 0;
    int n_layers = 0;
    int d_model = 0;
    std::vector<TaskVectorEntry> entries;  // k * |T|, task-major
};

// ------------------------------------------------------------ extraction

/// The task vector of a prompt: its last-token hidden state at every
/// layer. Read-only with respect to the model.
template <class S>
Mat<float> extract_task_vector(const ModelConfig& cfg, const ModelParams<S>& params,
                               const PromptSpec& prompt) {
    if (prompt.demos.empty()) {
        throw ArgumentError("extract_task_vector: prompt has no demonstrations");
    }
    ForwardOptions opts;
    opts.capture = true;
    const auto r = forward(cfg, params, prompt.tokens, opts);
    Mat<float> theta(cfg.n_layers, cfg.d_model);
    for (int l = 0; l < cfg.n_layers; ++l) {
        for (int j = 0; j < cfg.d_model; ++j) {
            theta.at(l, j) = static_cast<float>(r.trace->at(l, j));
        }
    }
    return theta;
}

/// h -> h + alpha * theta_l (add) or theta_l (replace). Pure.
inline std::vector<float> apply_intervention(const std::vector<float>& h,
                                             const std::vector<float>& theta_l,
                                             InterventionMode mode, float alpha) {
    if (h.size() != theta_l.size()) {
        throw ArgumentError("apply_intervention: dimension mismatch");
    }
    std::vector<float> out(h.size());
    if (mode == InterventionMode::Add) {
        for (std::size_t i = 0; i < h.size(); ++i) out[i] = h[i] + alpha * theta_l[i];
    } else {
        out = theta_l;
    }
    return out;
}

inline InterventionSpec intervention_at(const Mat<float>& theta, int layer,
                                        InterventionMode mode, float alpha) {
    InterventionSpec iv;
    iv.layer = layer;
    iv.mode = mode;
    iv.strength = alpha;
    iv.vec.assign(theta.row(layer), theta.row(layer) + theta.cols);
    return iv;
}

// --------------------------------------------------------- layer choice

struct LayerSelection {
    int best_layer = 0;
    std::vector<double> accuracy;  // per layer
};

/// Runs the intervention at every layer over the task's validation queries
/// and keeps the layer with the best accuracy, smallest index on ties.
template <class S>
LayerSelection select_best_layer(const ModelConfig& cfg, const ModelParams<S>& params,
                                 const Mat<float>& theta, const TaskSpec& task,
                                 const std::vector<QueryInstance>& validation,
                                 float alpha, InterventionMode mode = InterventionMode::Add) {
    if (validation.empty()) {
        throw ArgumentError("select_best_layer: empty validation set");
    }
    LayerSelection sel;
    sel.accuracy.resize(static_cast<std::size_t>(cfg.n_layers), 0.0);
    for (int l = 0; l < cfg.n_layers; ++l) {
        const InterventionSpec iv = intervention_at(theta, l, mode, alpha);
        int correct = 0;
        for (const auto& q : validation) {
            const Token got = generate_answer(cfg, params, q.tokens, task.answer_alphabet, &iv);
            correct += got == q.answer ? 1 : 0;
        }
        sel.accuracy[static_cast<std::size_t>(l)] =
            static_cast<double>(correct) / static_cast<double>(validation.size());
    }
    sel.best_layer = static_cast<int>(
        std::max_element(sel.accuracy.begin(), sel.accuracy.end()) - sel.accuracy.begin());
    return sel;
}

// -------------------------------------------------------------- building

template <class S>
CapabilityLibrary build_library(const ModelConfig& cfg, const ModelParams<S>& params,
                                const std::vector<TaskSpec>& tasks, const SplitSet& splits,
                                const LibraryConfig& lib_cfg) {
    if (lib_cfg.entries_per_task < 1) throw ConfigError("build_library: k must be >= 1");
    std::vector<const TaskSpec*> lib_tasks;
    for (const auto& t : tasks) {
        if (t.is_library) lib_tasks.push_back(&t);
    }
    if (lib_tasks.empty()) throw ConfigError("build_library: no library tasks");

    CapabilityLibrary lib;
    lib.model_fingerprint = model_fingerprint(cfg, params);
    lib.config = lib_cfg;
    lib.n_tasks = static_cast<int>(lib_tasks.size());
    lib.n_layers = cfg.n_layers;
    lib.d_model = cfg.d_model;

    int entry_id = 0;
    for (const TaskSpec* task : lib_tasks) {
        const auto validation = enumerate_queries(*task, splits, Split::Validation);
        for (int i = 0; i < lib_cfg.entries_per_task; ++i) {
            try {
                const PromptSpec prompt = build_icl_prompt(
                    *task, splits, lib_cfg.n_demos, /*template_id=*/0,
                    derive_seed(lib_cfg.seed, 0x6c696221ull,
                                static_cast<std::uint64_t>(task->task_id) * 0x100ull + i));
                TaskVectorEntry e;
                e.entry_id = entry_id++;
                e.task_id = task->task_id;
                e.prompt_tokens = prompt.tokens;
                e.theta = extract_task_vector(cfg, params, prompt);
                const auto sel = select_best_layer(cfg, params, e.theta, *task, validation,
                                                   lib_cfg.alpha, lib_cfg.mode);
                e.best_layer = sel.best_layer;
                e.val_accuracy = static_cast<float>(
                    sel.accuracy[static_cast<std::size_t>(sel.best_layer)]);
                lib.entries.push_back(std::move(e));
            } catch (const std::exception& ex) {
                throw std::runtime_error("build_library: task " + task->name + " entry " +
                                         std::to_string(i) + ": " + ex.what());
            }
        }
    }
    return lib;
}

// ----------------------------------------------------------------- ELIB

constexpr std::array<char, 4> kLibraryMagic{'E', 'L', 'I', 'B'};

// Payload layout (after the common magic/version framing):
//   fingerprint u64 | k u32 | n_tasks u32 | n_layers u32 | d_model u32
//   | alpha f32 | mode u8 | n_demos u32 | seed u64
//   | per entry: task_id u16, prompt tokens (u16 count + u16 each),
//                best_layer u8, val_accuracy f32, theta L*d f32
inline std::vector<std::uint8_t> library_payload(const CapabilityLibrary& lib) {
    ByteWriter w;
    w.put_u64(lib.model_fingerprint);
    w.put_u32(static_cast<std::uint32_t>(lib.config.entries_per_task));
    w.put_u32(static_cast<std::uint32_t>(lib.n_tasks));
    w.put_u32(static_cast<std::uint32_t>(lib.n_layers));
    w.put_u32(static_cast<std::uint32_t>(lib.d_model));
    w.put_f32(lib.config.alpha);
    w.put_u8(lib.config.mode == InterventionMode::Add ? 0 : 1);
    w.put_u32(static_cast<std::uint32_t>(lib.config.n_demos));
    w.put_u64(lib.config.seed);
    for (const auto& e : lib.entries) {
        w.put_u16(static_cast<std::uint16_t>(e.task_id));
        w.put_tokens(e.prompt_tokens);
        w.put_u8(static_cast<std::uint8_t>(e.best_layer));
        w.put_f32(e.val_accuracy);
        w.put_mat_f32(e.theta);
    }
    return std::move(w.buf);
}

inline void save_library(const CapabilityLibrary& lib, const std::filesystem::path& path) {
    save_container(path, kLibraryMagic, library_payload(lib));
}

/// Loads a library; when expected_fingerprint is nonzero and differs from
/// the stored one, sets *fingerprint_mismatch instead of failing so the
/// caller can surface a compatibility warning.
inline CapabilityLibrary load_library(const std::filesystem::path& path,
                                      std::uint64_t expected_fingerprint = 0,
                                      bool* fingerprint_mismatch = nullptr) {
    const Container c = load_container(path, kLibraryMagic);
    ByteReader r(c.payload.data(), c.payload.size());
    CapabilityLibrary lib;
    lib.model_fingerprint = r.get_u64();
    lib.config.entries_per_task = static_cast<int>(r.get_u32());
    lib.n_tasks = static_cast<int>(r.get_u32());
    lib.n_layers = static_cast<int>(r.get_u32());
    lib.d_model = static_cast<int>(r.get_u32());
    lib.config.alpha = r.get_f32();
    lib.config.mode = r.get_u8() == 0 ? InterventionMode::Add : InterventionMode::Replace;
    lib.config.n_demos = static_cast<int>(r.get_u32());
    lib.config.seed = r.get_u64();
    const int total = lib.config.entries_per_task * lib.n_tasks;
    for (int i = 0; i < total; ++i) {
        TaskVectorEntry e;
        e.entry_id = i;
        e.task_id = r.get_u16();
        e.prompt_tokens = r.get_tokens();
        e.best_layer = r.get_u8();
        e.val_accuracy = r.get_f32();
        e.theta = Mat<float>(lib.n_layers, lib.d_model);
        r.get_mat_f32(e.theta);
        lib.entries.push_back(std::move(e));
    }
    if (!r.exhausted()) throw CorruptionError("trailing bytes in library payload");
    if (fingerprint_mismatch != nullptr) {
        *fingerprint_mismatch =
            expected_fingerprint != 0 && expected_fingerprint != lib.model_fingerprint;
    }
    return lib;
}

/// Restriction used by the selective-activation experiment.
inline CapabilityLibrary filter_library_by_domain(const CapabilityLibrary& lib,
                                                  const std::vector<TaskSpec>& tasks,
                                                  Domain domain) {
    CapabilityLibrary out = lib;
    out.entries.clear();
    std::set<int> kept_tasks;
    for (const auto& e : lib.entries) {
        if (tasks.at(static_cast<std::size_t>(e.task_id)).domain == domain) {
            out.entries.push_back(e);
            kept_tasks.insert(e.task_id);
        }
    }
    out.n_tasks = static_cast<int>(kept_tasks.size());
    return out;
}

}  // namespace taskvec
