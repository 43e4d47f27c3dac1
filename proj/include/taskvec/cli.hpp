// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0
//
// Subcommand front-end. Exit codes: 0 success, 1 usage errors (bad flags,
// missing input artifacts), 2 runtime failures (corruption, fingerprint
// mismatch, numeric trouble).

#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "taskvec/pipeline.hpp"

namespace taskvec {

namespace fs = std::filesystem;

struct CliPaths {
    fs::path out_dir = "out";
    std::optional<fs::path> model, library, scorer, config;

    fs::path model_path() const { return model.value_or(out_dir / "model.elct"); }
    fs::path library_path() const { return library.value_or(out_dir / "library.elib"); }
    fs::path scorer_path() const { return scorer.value_or(out_dir / "scorer.ertr"); }
    fs::path calibration_path() const { return out_dir / "calibration.json"; }
};

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline void require_artifact(const fs::path& p, const std::string& what,
                             const std::string& producer) {
    if (!fs::exists(p)) {
        throw UsageError("missing " + what + " file: " + p.string() + " (produce it with `" +
                         producer + "`)");
    }
}

inline PipelineConfig load_config(const CliPaths& paths, std::optional<std::uint64_t> seed) {
    json j = json::object();
    if (paths.config) {
        require_artifact(*paths.config, "config", "a text editor");
        std::ifstream in(*paths.config);
        try {
            in >> j;
        } catch (const std::exception& e) {
            throw UsageError("config parse error in " + paths.config->string() + ": " +
                             e.what());
        }
    }
    if (seed) {
        // A master-seed override re-derives every per-stage seed.
        j["seed"] = *seed;
        for (const char* section : {"suite", "model", "train", "library", "pair_data",
                                    "scorer"}) {
            if (j.contains(section) && j[section].contains("seed")) {
                j[section].erase("seed");
            }
        }
    }
    PipelineConfig cfg = config_from_json(j);
    validate_pipeline_config(cfg);
    return cfg;
}

struct Artifacts {
    PipelineConfig cfg;
    std::vector<TaskSpec> tasks;
    SplitSet splits;
    std::optional<LoadedModel> model;
    std::optional<CapabilityLibrary> library;
    std::optional<PairScorer> scorer;
};

inline Artifacts load_suite(const CliPaths& paths, std::optional<std::uint64_t> seed) {
    Artifacts a;
    a.cfg = load_config(paths, seed);
    a.tasks = make_tasks(a.cfg.suite.n_library, a.cfg.suite.n_unseen, a.cfg.suite.seed,
                         a.cfg.suite.alphabet_size);
    a.splits = make_splits(a.tasks, a.cfg.suite);
    return a;
}

inline void load_model_artifact(Artifacts& a, const CliPaths& paths) {
    require_artifact(paths.model_path(), "model checkpoint", "taskvec train-model");
    a.model = load_model(paths.model_path());
}

inline void load_library_artifact(Artifacts& a, const CliPaths& paths) {
    require_artifact(paths.library_path(), "capability library", "taskvec build-library");
    bool mismatch = false;
    a.library = load_library(paths.library_path(),
                             a.model ? a.model->fingerprint : 0, &mismatch);
    if (mismatch) {
        throw CorruptionError("library fingerprint does not match the model checkpoint (" +
                              paths.library_path().string() + ")");
    }
}

inline void load_scorer_artifact(Artifacts& a, const CliPaths& paths) {
    require_artifact(paths.scorer_path(), "retrieval scorer", "taskvec train-retriever");
    a.scorer = load_scorer(paths.scorer_path());
}

inline double load_tau(Artifacts& a, const CliPaths& paths) {
    require_artifact(paths.calibration_path(), "calibration result", "taskvec calibrate");
    std::ifstream in(paths.calibration_path());
    json j;
    in >> j;
    a.cfg.retrieval.tau = j.at("tau").get<double>();
    return a.cfg.retrieval.tau;
}

inline EvalContext make_context(const Artifacts& a, bool with_bm25) {
    EvalContext ctx;
    ctx.cfg = &a.cfg;
    ctx.tasks = &a.tasks;
    ctx.splits = &a.splits;
    ctx.model_cfg = &a.model->config;
    ctx.params = &a.model->params;
    if (a.library) ctx.library = &*a.library;
    if (a.scorer) ctx.scorer = &*a.scorer;
    if (with_bm25) ctx.bm25 = build_demo_index(a.tasks, a.splits);
    return ctx;
}

/// Top-1 labeled scores of the validation queries of every library task,
/// the calibration input.
inline std::vector<std::pair<double, bool>> labeled_top1_scores(const Artifacts& a) {
    std::vector<std::pair<double, bool>> top1;
    for (const auto& q : gather_queries(a.tasks, a.splits, Split::Validation, true)) {
        const auto ranking = rank_library(*a.scorer, q.tokens, *a.library);
        const auto& best = ranking.items.front();
        const int top_task =
            a.library->entries.at(static_cast<std::size_t>(best.first)).task_id;
        top1.emplace_back(best.second, top_task == q.task_id);
    }
    return top1;
}

}  // namespace detail

inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"task-vector steering pipeline"};
    app.require_subcommand(1);

    CliPaths paths;
    std::optional<std::uint64_t> seed;
    std::optional<double> alpha_override;
    std::optional<int> top_n_override;
    std::optional<double> target_recall_override;
    std::string method_str = "elicit";

    app.add_option("--config", paths.config, "JSON configuration file");
    app.add_option("--seed", seed, "master seed override (re-derives stage seeds)");
    app.add_option("--out-dir", paths.out_dir, "artifact directory");
    app.add_option("--model", paths.model, "model checkpoint path");
    app.add_option("--library", paths.library, "capability library path");
    app.add_option("--scorer", paths.scorer, "retrieval scorer path");
    app.add_option("--alpha", alpha_override, "intervention strength override");
    app.add_option("--top-n", top_n_override, "DTT top-n override");
    app.add_option("--target-recall", target_recall_override, "calibration recall target");

    auto* cmd_train = app.add_subcommand("train-model", "train the base model");
    auto* cmd_lib = app.add_subcommand("build-library", "extract the capability library");
    auto* cmd_retr = app.add_subcommand("train-retriever", "train the pair scorer");
    auto* cmd_cal = app.add_subcommand("calibrate", "calibrate the retrieval threshold");
    auto* cmd_eval = app.add_subcommand("eval", "evaluate one method on the test split");
    cmd_eval->add_option("--method", method_str,
                         "zero_shot | icl_16 | bm25_16 | elicit | bm25_plus_elicit");
    auto* cmd_sweep = app.add_subcommand("sweep-alpha", "layer/strength sweep");
    auto* cmd_sel = app.add_subcommand("selective", "arithmetic-only library experiment");
    auto* cmd_unseen = app.add_subcommand("unseen", "unseen-task experiment");
    auto* cmd_report = app.add_subcommand("report", "merge evaluation reports");

    std::vector<const char*> argv;
    argv.push_back("taskvec");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            std::cout << app.help() << std::endl;
            return 0;
        }
        std::cerr << "usage error: " << e.what() << std::endl;
        return 1;
    }

    try {
        auto apply_overrides = [&](PipelineConfig& cfg) {
            if (alpha_override) {
                cfg.library.alpha = static_cast<float>(*alpha_override);
                cfg.retrieval.alpha = static_cast<float>(*alpha_override);
            }
            if (top_n_override) cfg.retrieval.top_n = *top_n_override;
            if (target_recall_override) cfg.retrieval.target_recall = *target_recall_override;
        };

        if (cmd_train->parsed()) {
            auto a = detail::load_suite(paths, seed);
            apply_overrides(a.cfg);
            fs::create_directories(paths.out_dir);
            write_json_atomic(paths.out_dir / "manifest.json",
                              suite_manifest(a.tasks, a.splits, a.cfg.suite));
            std::cout << "training: steps=" << a.cfg.train.steps
                      << " batch=" << a.cfg.train.batch_size << std::endl;
            const TrainResult tr = train(a.cfg.model, a.cfg.train, a.tasks, a.splits);
            const std::uint64_t fp = save_model(paths.model_path(), a.cfg.model, tr.params);
            json log;
            log["schema_version"] = 1;
            log["losses"] = tr.losses;
            log["val_icl16_accuracy"] = tr.val_icl16_accuracy;
            log["val_zero_shot_accuracy"] = tr.val_zero_shot_accuracy;
            char fp_hex[17];
            std::snprintf(fp_hex, sizeof(fp_hex), "%016llx",
                          static_cast<unsigned long long>(fp));
            log["model_fingerprint"] = fp_hex;
            log["config"] = config_to_json(a.cfg);
            write_json_atomic(paths.out_dir / "train_log.json", log);
            std::cout << "val 16-shot acc " << tr.val_icl16_accuracy << ", zero-shot acc "
                      << tr.val_zero_shot_accuracy << std::endl;
            return 0;
        }

        if (cmd_lib->parsed()) {
            auto a = detail::load_suite(paths, seed);
            apply_overrides(a.cfg);
            detail::load_model_artifact(a, paths);
            const auto lib = build_library(a.model->config, a.model->params, a.tasks,
                                           a.splits, a.cfg.library);
            save_library(lib, paths.library_path());
            json summary;
            summary["schema_version"] = 1;
            summary["entries"] = lib.entries.size();
            summary["tasks"] = lib.n_tasks;
            summary["k"] = lib.config.entries_per_task;
            json layers = json::array();
            for (const auto& e : lib.entries) layers.push_back(e.best_layer);
            summary["best_layers"] = std::move(layers);
            write_json_atomic(paths.out_dir / "library_summary.json", summary);
            std::cout << "library: " << lib.entries.size() << " entries" << std::endl;
            return 0;
        }

        if (cmd_retr->parsed()) {
            auto a = detail::load_suite(paths, seed);
            apply_overrides(a.cfg);
            detail::load_model_artifact(a, paths);
            const auto pairs = build_pair_dataset(a.tasks, a.splits, a.cfg.pair_data);
            PairScorer scorer = init_scorer(a.cfg.scorer, &a.model->params.tok_emb);
            const auto rep = train_scorer(scorer, pairs);
            save_scorer(scorer, paths.scorer_path());
            json r;
            r["schema_version"] = 1;
            r["pairs"] = pairs.size();
            r["train_pairs"] = rep.train_pairs;
            r["heldout_pairs"] = rep.heldout_pairs;
            r["heldout_pr_auc"] = rep.heldout_pr_auc;
            r["epoch_losses"] = rep.epoch_losses;
            write_json_atomic(paths.out_dir / "retriever_report.json", r);
            std::cout << "scorer held-out PR-AUC " << rep.heldout_pr_auc << std::endl;
            return 0;
        }

        if (cmd_cal->parsed()) {
            auto a = detail::load_suite(paths, seed);
            apply_overrides(a.cfg);
            detail::load_model_artifact(a, paths);
            detail::load_library_artifact(a, paths);
            detail::load_scorer_artifact(a, paths);
            const auto top1 = detail::labeled_top1_scores(a);
            const auto cal = calibrate_threshold(top1, a.cfg.retrieval.target_recall);
            json cj;
            cj["tau"] = cal.tau;
            cj["target_recall"] = cal.target_recall;
            cj["achieved_recall"] = cal.achieved_recall;
            cj["achieved_precision"] = cal.achieved_precision;
            cj["auc"] = cal.auc;
            write_json_atomic(paths.calibration_path(), cj);
            write_text_atomic(paths.out_dir / "pr_curve.csv", pr_curve_csv(cal));
            a.cfg.retrieval.tau = cal.tau;
            const auto ctx = detail::make_context(a, false);
            write_json_atomic(paths.out_dir / "dtt_ablation.json",
                              run_dtt_sweep(ctx, {1, 5, 10, 15}, a.cfg.seed));
            std::cout << "tau " << cal.tau << " (recall " << cal.achieved_recall << ")"
                      << std::endl;
            return 0;
        }

        if (cmd_eval->parsed()) {
            const Method method = parse_method(method_str);
            auto a = detail::load_suite(paths, seed);
            apply_overrides(a.cfg);
            detail::load_model_artifact(a, paths);
            const bool needs_library =
                method == Method::Elicit || method == Method::Bm25PlusElicit;
            if (needs_library) {
                detail::load_library_artifact(a, paths);
                detail::load_scorer_artifact(a, paths);
                detail::load_tau(a, paths);
            }
            const bool needs_bm25 =
                method == Method::Bm25_16 || method == Method::Bm25PlusElicit;
            auto ctx = detail::make_context(a, needs_bm25);
            const auto queries = gather_queries(a.tasks, a.splits, Split::Test, true);
            EvalReport rep = run_eval(method, ctx, queries, a.cfg.seed);
            rep.split = "test";
            write_json_atomic(paths.out_dir / (std::string("eval_") + method_name(method) +
                                               ".json"),
                              rep.to_json());
            std::cout << method_name(method) << ": avg_per_task "
                      << rep.to_json()["avg_per_task"] << ", mean tokens "
                      << rep.to_json()["mean_tokens"] << std::endl;
            return 0;
        }

        if (cmd_sweep->parsed()) {
            auto a = detail::load_suite(paths, seed);
            apply_overrides(a.cfg);
            detail::load_model_artifact(a, paths);
            detail::load_library_artifact(a, paths);
            auto ctx = detail::make_context(a, false);
            std::vector<int> layers(static_cast<std::size_t>(a.model->config.n_layers));
            for (int l = 0; l < a.model->config.n_layers; ++l) layers[static_cast<std::size_t>(l)] = l;
            const SweepGrid grid = sweep_alpha(ctx, a.cfg.alpha_grid, layers);
            write_text_atomic(paths.out_dir / "sweep.csv", grid.to_csv());
            write_json_atomic(paths.out_dir / "sweep.json", grid.to_json());
            std::cout << "sweep: " << grid.layers.size() << " layers x "
                      << grid.alphas.size() << " strengths" << std::endl;
            return 0;
        }

        if (cmd_sel->parsed() || cmd_unseen->parsed()) {
            auto a = detail::load_suite(paths, seed);
            apply_overrides(a.cfg);
            detail::load_model_artifact(a, paths);
            detail::load_library_artifact(a, paths);
            detail::load_scorer_artifact(a, paths);
            detail::load_tau(a, paths);
            auto ctx = detail::make_context(a, false);
            if (cmd_sel->parsed()) {
                const json r = run_selective(ctx, Domain::Arithmetic, a.cfg.seed);
                write_json_atomic(paths.out_dir / "selective.json", r);
                std::cout << "selective: deltas " << r["per_domain_delta"] << std::endl;
            } else {
                const json r = run_unseen(ctx, a.cfg.seed);
                write_json_atomic(paths.out_dir / "unseen.json", r);
                std::cout << "unseen: delta " << r["accuracy_delta"] << ", rate "
                          << r["intervention_rate"] << std::endl;
            }
            return 0;
        }

        if (cmd_report->parsed()) {
            std::vector<json> reports;
            for (const char* m :
                 {"zero_shot", "icl_16", "bm25_16", "elicit", "bm25_plus_elicit"}) {
                const fs::path p = paths.out_dir / (std::string("eval_") + m + ".json");
                if (fs::exists(p)) {
                    std::ifstream in(p);
                    json j;
                    in >> j;
                    reports.push_back(std::move(j));
                }
            }
            if (reports.empty()) {
                throw UsageError("no eval_*.json reports in " + paths.out_dir.string() +
                                 " (produce them with `taskvec eval`)");
            }
            std::optional<json> dtt;
            const fs::path dp = paths.out_dir / "dtt_ablation.json";
            if (fs::exists(dp)) {
                std::ifstream in(dp);
                json j;
                in >> j;
                dtt = std::move(j);
            }
            write_json_atomic(paths.out_dir / "report.json", merge_reports(reports, dtt));
            std::cout << "report.json written (" << reports.size() << " methods)"
                      << std::endl;
            return 0;
        }

        throw UsageError("no subcommand given");
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << std::endl;
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 2;
    }
}

}  // namespace taskvec
