// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0
//
// Synthetic task suite. Every task owns a disjoint block of symbol tokens,
// a deterministic mapping rule, and a small family of sibling rules used
// when sampling base-model training sequences: a sequence drawn from the
// family is ambiguous until the demonstrations reveal which rule is active,
// which is what makes few-shot prompts informative and bare queries hard.

#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskvec/common.hpp"

namespace taskvec {

// Reserved token ids. Symbol alphabets start at kSymbolBase.
constexpr Token kPad = 0;
constexpr Token kSepA = 1;
constexpr Token kSepB = 2;
constexpr Token kArrowA = 3;
constexpr Token kArrowB = 4;
constexpr Token kInstr1 = 5;
constexpr Token kInstr2 = 6;
constexpr Token kClassA = 7;
constexpr Token kClassB = 8;
constexpr Token kClassC = 9;
constexpr Token kClassD = 10;
constexpr Token kSymbolBase = 16;

constexpr int kNumTemplates = 3;

enum class TaskKind { OffsetMap, PermutationMap, ParityClass, PairSelect };
enum class Domain { Mapping, Arithmetic, Relational };
enum class PairOp { Max, Min, First, Second };

inline const char* kind_name(TaskKind k) {
    switch (k) {
        case TaskKind::OffsetMap: return "offset_map";
        case TaskKind::PermutationMap: return "permutation_map";
        case TaskKind::ParityClass: return "parity_class";
        case TaskKind::PairSelect: return "pair_select";
    }
    return "?";
}

inline const char* domain_name(Domain d) {
    switch (d) {
        case Domain::Mapping: return "mapping";
        case Domain::Arithmetic: return "arithmetic";
        case Domain::Relational: return "relational";
    }
    return "?";
}

/// One or two input symbols, depending on the task kind.
using QueryInput = std::vector<Token>;

struct RuleVariant {
    TaskKind kind = TaskKind::OffsetMap;
    int offset = 0;                // OffsetMap
    std::vector<int> perm;         // PermutationMap, symbol index -> symbol index
    Token class_even = kClassA;    // ParityClass
    Token class_odd = kClassB;
    PairOp op = PairOp::Max;       // PairSelect

    bool operator==(const RuleVariant&) const = default;
};

struct TaskSpec {
    int task_id = 0;
    std::string name;
    TaskKind kind = TaskKind::OffsetMap;
    Domain domain = Domain::Mapping;
    bool is_library = true;
    Token alphabet_base = kSymbolBase;
    int alphabet_size = 32;
    std::vector<Token> answer_alphabet;
    RuleVariant rule;
    std::vector<RuleVariant> family;  // sibling rules sampled during base training

    int arity() const { return kind == TaskKind::PairSelect ? 2 : 1; }

    std::vector<Token> input_alphabet() const {
        std::vector<Token> v(static_cast<std::size_t>(alphabet_size));
        for (int i = 0; i < alphabet_size; ++i) {
            v[i] = static_cast<Token>(alphabet_base + i);
        }
        return v;
    }

    int symbol_index(Token t) const {
        const int i = static_cast<int>(t) - static_cast<int>(alphabet_base);
        if (i < 0 || i >= alphabet_size) {
            throw ArgumentError("token " + std::to_string(t) + " outside task " +
                                std::to_string(task_id) + " alphabet");
        }
        return i;
    }

    Token symbol(int i) const { return static_cast<Token>(alphabet_base + i); }
};

inline Token apply_rule(const TaskSpec& task, const RuleVariant& rule, const QueryInput& x) {
    switch (rule.kind) {
        case TaskKind::OffsetMap: {
            const int i = task.symbol_index(x.at(0));
            return task.symbol((i + rule.offset) % task.alphabet_size);
        }
        case TaskKind::PermutationMap: {
            const int i = task.symbol_index(x.at(0));
            return task.symbol(rule.perm.at(static_cast<std::size_t>(i)));
        }
        case TaskKind::ParityClass: {
            const int i = task.symbol_index(x.at(0));
            return i % 2 == 0 ? rule.class_even : rule.class_odd;
        }
        case TaskKind::PairSelect: {
            const int i = task.symbol_index(x.at(0));
            const int j = task.symbol_index(x.at(1));
            switch (rule.op) {
                case PairOp::Max: return task.symbol(std::max(i, j));
                case PairOp::Min: return task.symbol(std::min(i, j));
                case PairOp::First: return task.symbol(i);
                case PairOp::Second: return task.symbol(j);
            }
        }
    }
    throw ArgumentError("unhandled rule kind");
}

inline Token task_answer(const TaskSpec& task, const QueryInput& x) {
    return apply_rule(task, task.rule, x);
}

// ------------------------------------------------------------- make_tasks

namespace detail {

inline std::vector<int> random_perm(int n, Rng& rng) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[i] = i;
    rng.shuffle(p);
    return p;
}

/// Fixed-point-free involution pairing adjacent symbols, the "antonym" map.
inline std::vector<int> involution_perm(int n) {
    std::vector<int> p(static_cast<std::size_t>(n));
    for (int i = 0; i + 1 < n; i += 2) {
        p[i] = i + 1;
        p[i + 1] = i;
    }
    if (n % 2 == 1) p[n - 1] = n - 1;
    return p;
}

inline std::vector<RuleVariant> offset_family(int base, int alphabet_size) {
    std::vector<RuleVariant> fam;
    const int step = alphabet_size / 4;
    for (int j = 0; j < 4; ++j) {
        RuleVariant r;
        r.kind = TaskKind::OffsetMap;
        r.offset = (base + j * step) % alphabet_size;
        fam.push_back(r);
    }
    return fam;
}

inline std::vector<RuleVariant> perm_family(int alphabet_size, Rng& rng,
                                            std::optional<std::vector<int>> first) {
    std::vector<RuleVariant> fam;
    while (fam.size() < 4) {
        RuleVariant r;
        r.kind = TaskKind::PermutationMap;
        r.perm = (fam.empty() && first) ? *first : random_perm(alphabet_size, rng);
        if (std::none_of(fam.begin(), fam.end(),
                         [&](const RuleVariant& o) { return o.perm == r.perm; })) {
            fam.push_back(std::move(r));
        }
    }
    return fam;
}

inline std::vector<RuleVariant> parity_family() {
    std::vector<RuleVariant> fam;
    const std::pair<Token, Token> pairs[4] = {
        {kClassA, kClassB}, {kClassB, kClassA}, {kClassC, kClassD}, {kClassD, kClassC}};
    for (const auto& [e, o] : pairs) {
        RuleVariant r;
        r.kind = TaskKind::ParityClass;
        r.class_even = e;
        r.class_odd = o;
        fam.push_back(r);
    }
    return fam;
}

inline std::vector<RuleVariant> pair_family() {
    std::vector<RuleVariant> fam;
    for (PairOp op : {PairOp::Max, PairOp::Min, PairOp::First, PairOp::Second}) {
        RuleVariant r;
        r.kind = TaskKind::PairSelect;
        r.op = op;
        fam.push_back(r);
    }
    return fam;
}

}  // namespace detail

/// Builds n_library library tasks plus n_unseen tasks kept out of the
/// capability library. Deterministic in (n_library, n_unseen, seed).
inline std::vector<TaskSpec> make_tasks(int n_library, int n_unseen,
                                        std::uint64_t seed, int alphabet_size = 32) {
    if (n_library < 4) throw ConfigError("make_tasks: n_library must be >= 4");
    if (n_unseen < 1) throw ConfigError("make_tasks: n_unseen must be >= 1");
    if (alphabet_size < 8 || alphabet_size % 4 != 0) {
        throw ConfigError("make_tasks: alphabet too small for 4 distinct family rules");
    }

    std::vector<TaskSpec> tasks;
    const int total = n_library + n_unseen;
    for (int id = 0; id < total; ++id) {
        TaskSpec t;
        t.task_id = id;
        t.is_library = id < n_library;
        t.alphabet_base = static_cast<Token>(kSymbolBase + id * alphabet_size);
        t.alphabet_size = alphabet_size;
        Rng rng(derive_seed(seed, 0x7461736bull, static_cast<std::uint64_t>(id)));

        const int slot = t.is_library ? id : id - n_library;
        if (t.is_library) {
            switch (slot % 6) {
                case 0:
                    t.name = "successor";
                    t.kind = TaskKind::OffsetMap;
                    t.domain = Domain::Arithmetic;
                    t.family = detail::offset_family(1 + 2 * (slot / 6), alphabet_size);
                    break;
                case 1:
                    t.name = "offset5";
                    t.kind = TaskKind::OffsetMap;
                    t.domain = Domain::Arithmetic;
                    t.family = detail::offset_family(5 + 2 * (slot / 6), alphabet_size);
                    break;
                case 2:
                    t.name = "copy";
                    t.kind = TaskKind::OffsetMap;
                    t.domain = Domain::Mapping;
                    t.family = detail::offset_family(0 + 2 * (slot / 6), alphabet_size);
                    break;
                case 3:
                    t.name = "antonym";
                    t.kind = TaskKind::PermutationMap;
                    t.domain = Domain::Mapping;
                    t.family = detail::perm_family(alphabet_size, rng,
                                                   detail::involution_perm(alphabet_size));
                    break;
                case 4:
                    t.name = "parity";
                    t.kind = TaskKind::ParityClass;
                    t.domain = Domain::Relational;
                    t.family = detail::parity_family();
                    break;
                case 5:
                    t.name = "pair_max";
                    t.kind = TaskKind::PairSelect;
                    t.domain = Domain::Relational;
                    t.family = detail::pair_family();
                    break;
            }
            t.rule = t.family.front();
            if (slot >= 6) t.name += "_" + std::to_string(slot / 6);
        } else if (slot % 2 == 0) {
            // Same rule family as the offset library tasks, different offset.
            t.name = "unseen_offset";
            t.kind = TaskKind::OffsetMap;
            t.domain = Domain::Arithmetic;
            t.family = detail::offset_family(9 + 2 * (slot / 2), alphabet_size);
            t.rule = t.family.front();
            if (slot >= 2) t.name += "_" + std::to_string(slot / 2);
        } else {
            // Shuffled-label task: the evaluated permutation was never part
            // of the base model's training family, so it cannot be solved.
            t.name = "unseen_shuffled";
            t.kind = TaskKind::PermutationMap;
            t.domain = Domain::Mapping;
            t.family = detail::perm_family(alphabet_size, rng, std::nullopt);
            RuleVariant fresh;
            fresh.kind = TaskKind::PermutationMap;
            do {
                fresh.perm = detail::random_perm(alphabet_size, rng);
            } while (std::any_of(t.family.begin(), t.family.end(),
                                 [&](const RuleVariant& o) { return o.perm == fresh.perm; }));
            t.rule = fresh;
            if (slot >= 2) t.name += "_" + std::to_string(slot / 2);
        }

        switch (t.kind) {
            case TaskKind::ParityClass:
                t.answer_alphabet = {t.rule.class_even, t.rule.class_odd};
                break;
            default:
                t.answer_alphabet = t.input_alphabet();
                break;
        }
        tasks.push_back(std::move(t));
    }
    return tasks;
}

inline int vocab_size_for(const std::vector<TaskSpec>& tasks) {
    int v = kSymbolBase;
    for (const auto& t : tasks) {
        v = std::max(v, static_cast<int>(t.alphabet_base) + t.alphabet_size);
    }
    return v;
}

// --------------------------------------------------------------- splits

struct TaskSplits {
    std::vector<QueryInput> library_pool;  // demonstration inputs
    std::vector<QueryInput> validation;
    std::vector<QueryInput> test;
};

struct SplitSet {
    std::vector<TaskSplits> per_task;  // indexed by task_id

    const TaskSplits& of(const TaskSpec& t) const {
        return per_task.at(static_cast<std::size_t>(t.task_id));
    }
};

struct SuiteConfig {
    int n_library = 6;
    int n_unseen = 2;
    int alphabet_size = 32;
    int lib_pool = 18;   // single-symbol demonstration pool
    int n_val = 7;       // held-out inputs per task for validation
    int n_test = 7;      // held-out inputs per task for testing
    int pair_lib_pool = 48;
    std::uint64_t seed = 0;
};

inline SplitSet make_splits(const std::vector<TaskSpec>& tasks, const SuiteConfig& cfg) {
    SplitSet s;
    for (const auto& t : tasks) {
        Rng rng(derive_seed(cfg.seed, 0x73706c74ull, static_cast<std::uint64_t>(t.task_id)));
        TaskSplits ts;
        if (t.arity() == 1) {
            if (cfg.lib_pool + cfg.n_val + cfg.n_test > t.alphabet_size) {
                throw ConfigError("split sizes exceed alphabet");
            }
            auto order = rng.sample_without_replacement(
                static_cast<std::size_t>(t.alphabet_size),
                static_cast<std::size_t>(cfg.lib_pool + cfg.n_val + cfg.n_test));
            std::size_t k = 0;
            for (int i = 0; i < cfg.lib_pool; ++i) ts.library_pool.push_back({t.symbol(static_cast<int>(order[k++]))});
            for (int i = 0; i < cfg.n_val; ++i) ts.validation.push_back({t.symbol(static_cast<int>(order[k++]))});
            for (int i = 0; i < cfg.n_test; ++i) ts.test.push_back({t.symbol(static_cast<int>(order[k++]))});
        } else {
            const std::size_t space = static_cast<std::size_t>(t.alphabet_size) * t.alphabet_size;
            auto order = rng.sample_without_replacement(
                space, static_cast<std::size_t>(cfg.pair_lib_pool + cfg.n_val + cfg.n_test));
            std::size_t k = 0;
            auto decode = [&](std::size_t idx) {
                return QueryInput{t.symbol(static_cast<int>(idx / t.alphabet_size)),
                                  t.symbol(static_cast<int>(idx % t.alphabet_size))};
            };
            for (int i = 0; i < cfg.pair_lib_pool; ++i) ts.library_pool.push_back(decode(order[k++]));
            for (int i = 0; i < cfg.n_val; ++i) ts.validation.push_back(decode(order[k++]));
            for (int i = 0; i < cfg.n_test; ++i) ts.test.push_back(decode(order[k++]));
        }
        s.per_task.push_back(std::move(ts));
    }
    return s;
}

// ------------------------------------------------------------- rendering

/// Query surface form. Three distinct templates vary the instruction
/// prefix, separators and arrow token; the answer does not depend on them.
inline std::vector<Token> render_template(const QueryInput& x, const TaskSpec& task,
                                          int template_id) {
    (void)task;
    std::vector<Token> out;
    switch (template_id) {
        case 0:
            out.insert(out.end(), x.begin(), x.end());
            out.push_back(kArrowA);
            break;
        case 1:
            out.push_back(kInstr1);
            out.insert(out.end(), x.begin(), x.end());
            out.push_back(kArrowB);
            break;
        case 2:
            out.push_back(kInstr2);
            out.push_back(kSepB);
            out.insert(out.end(), x.begin(), x.end());
            out.push_back(kArrowA);
            break;
        default:
            throw ArgumentError("template_id must be 0, 1 or 2");
    }
    return out;
}

inline void append_demo_block(std::vector<Token>& out, const QueryInput& x, Token y,
                              int template_id) {
    out.insert(out.end(), x.begin(), x.end());
    out.push_back(template_id == 1 ? kArrowB : kArrowA);
    out.push_back(y);
    out.push_back(template_id == 0 ? kSepA : kSepB);
}

struct PromptSpec {
    int task_id = 0;
    int template_id = 0;   // query surface form
    int demo_template = 0; // demonstration surface form
    std::vector<std::pair<QueryInput, Token>> demos;
    QueryInput query;
    Token answer = 0;
    std::vector<Token> tokens;
};

inline std::vector<Token> render_prompt(const TaskSpec& task,
                                        const std::vector<std::pair<QueryInput, Token>>& demos,
                                        int demo_template, const QueryInput& query,
                                        int query_template) {
    std::vector<Token> out;
    for (const auto& [x, y] : demos) append_demo_block(out, x, y, demo_template);
    const auto q = render_template(query, task, query_template);
    out.insert(out.end(), q.begin(), q.end());
    return out;
}

inline PromptSpec make_prompt(const TaskSpec& task,
                              std::vector<std::pair<QueryInput, Token>> demos,
                              int demo_template, QueryInput query, int query_template) {
    PromptSpec p;
    p.task_id = task.task_id;
    p.template_id = query_template;
    p.demo_template = demo_template;
    p.demos = std::move(demos);
    p.query = std::move(query);
    p.answer = task_answer(task, p.query);
    p.tokens = render_prompt(task, p.demos, demo_template, p.query, query_template);
    return p;
}

/// ICL prompt with N demonstrations drawn from the task's demonstration
/// pool without replacement; the query is drawn from the pool entries not
/// used as demonstrations. N = 0 degenerates to a bare templated query.
inline PromptSpec build_icl_prompt(const TaskSpec& task, const SplitSet& splits, int N,
                                   int template_id, std::uint64_t seed) {
    const auto& pool = splits.of(task).library_pool;
    if (N < 0) throw ArgumentError("build_icl_prompt: negative N");
    if (static_cast<std::size_t>(N) + 1 > pool.size()) {
        throw SamplingError("build_icl_prompt: demonstration pool exhausted");
    }
    Rng rng(derive_seed(seed, 0x70726d74ull, static_cast<std::uint64_t>(task.task_id)));
    auto idx = rng.sample_without_replacement(pool.size(), static_cast<std::size_t>(N) + 1);
    std::vector<std::pair<QueryInput, Token>> demos;
    for (int j = 0; j < N; ++j) {
        const auto& x = pool[idx[static_cast<std::size_t>(j)]];
        demos.emplace_back(x, task_answer(task, x));
    }
    QueryInput query = pool[idx.back()];
    return make_prompt(task, std::move(demos), template_id, std::move(query), template_id);
}

/// ICL prompt around a caller-chosen query (validation/test evaluation).
/// Demonstrations use the library surface form (template 0).
inline PromptSpec build_prompt_for_query(const TaskSpec& task, const SplitSet& splits, int N,
                                         const QueryInput& query, int query_template,
                                         std::uint64_t seed) {
    const auto& pool = splits.of(task).library_pool;
    std::vector<const QueryInput*> candidates;
    for (const auto& x : pool) {
        if (x != query) candidates.push_back(&x);
    }
    if (static_cast<std::size_t>(N) > candidates.size()) {
        throw SamplingError("build_prompt_for_query: demonstration pool exhausted");
    }
    Rng rng(derive_seed(seed, 0x71707274ull, static_cast<std::uint64_t>(task.task_id)));
    auto idx = rng.sample_without_replacement(candidates.size(), static_cast<std::size_t>(N));
    std::vector<std::pair<QueryInput, Token>> demos;
    for (auto i : idx) demos.emplace_back(*candidates[i], task_answer(task, *candidates[i]));
    return make_prompt(task, std::move(demos), 0, query, query_template);
}

// --------------------------------------------------------- query batches

enum class Split { Validation, Test };

struct QueryInstance {
    int task_id = 0;
    QueryInput x;
    int template_id = 0;
    std::vector<Token> tokens;
    Token answer = 0;
};

/// Every held-out input crossed with every template, input-major.
inline std::vector<QueryInstance> enumerate_queries(const TaskSpec& task,
                                                    const SplitSet& splits, Split split) {
    const auto& xs = split == Split::Validation ? splits.of(task).validation
                                                : splits.of(task).test;
    std::vector<QueryInstance> out;
    for (const auto& x : xs) {
        for (int tpl = 0; tpl < kNumTemplates; ++tpl) {
            QueryInstance q;
            q.task_id = task.task_id;
            q.x = x;
            q.template_id = tpl;
            q.tokens = render_template(x, task, tpl);
            q.answer = task_answer(task, x);
            out.push_back(std::move(q));
        }
    }
    return out;
}

// ------------------------------------------------------- training corpus

/// One base-model training sequence: rendered prompt plus the answer token.
/// The rule is drawn from the task's family, the demonstration count from
/// U{0..max_demos}, and both surface forms independently from the three
/// templates, so every evaluation-time prompt shape is in-distribution.
inline std::vector<Token> sample_training_sequence(const std::vector<TaskSpec>& tasks,
                                                   const SplitSet& splits, int max_demos,
                                                   Rng& rng) {
    const TaskSpec& task = tasks[rng.below(tasks.size())];
    const RuleVariant& rule = task.family[rng.below(task.family.size())];
    const int n_demos = static_cast<int>(rng.below(static_cast<std::size_t>(max_demos) + 1));
    const int demo_template = static_cast<int>(rng.below(kNumTemplates));
    const int query_template = static_cast<int>(rng.below(kNumTemplates));

    const auto& pool = splits.of(task).library_pool;
    auto idx = rng.sample_without_replacement(pool.size(),
                                              static_cast<std::size_t>(n_demos));
    std::vector<std::pair<QueryInput, Token>> demos;
    demos.reserve(static_cast<std::size_t>(n_demos));
    for (auto i : idx) demos.emplace_back(pool[i], apply_rule(task, rule, pool[i]));

    QueryInput query;
    for (;;) {
        if (task.arity() == 1) {
            query = {task.symbol(static_cast<int>(rng.below(
                static_cast<std::size_t>(task.alphabet_size))))};
        } else {
            query = {task.symbol(static_cast<int>(rng.below(
                         static_cast<std::size_t>(task.alphabet_size)))),
                     task.symbol(static_cast<int>(rng.below(
                         static_cast<std::size_t>(task.alphabet_size))))};
        }
        bool clash = false;
        for (const auto& [x, y] : demos) clash = clash || x == query;
        if (!clash) break;
    }

    auto tokens = render_prompt(task, demos, demo_template, query, query_template);
    tokens.push_back(apply_rule(task, rule, query));
    return tokens;
}

inline std::vector<std::vector<Token>> sample_corpus(const std::vector<TaskSpec>& tasks,
                                                     const SplitSet& splits, int max_demos,
                                                     int n_sequences, std::uint64_t seed) {
    std::vector<std::vector<Token>> corpus;
    corpus.reserve(static_cast<std::size_t>(n_sequences));
    for (int i = 0; i < n_sequences; ++i) {
        Rng rng(derive_seed(seed, 0x636f7270ull, static_cast<std::uint64_t>(i)));
        corpus.push_back(sample_training_sequence(tasks, splits, max_demos, rng));
    }
    return corpus;
}

// --------------------------------------------------------------- manifest

inline nlohmann::json rule_to_json(const RuleVariant& r) {
    nlohmann::json j;
    j["kind"] = kind_name(r.kind);
    switch (r.kind) {
        case TaskKind::OffsetMap: j["offset"] = r.offset; break;
        case TaskKind::PermutationMap: j["perm"] = r.perm; break;
        case TaskKind::ParityClass:
            j["class_even"] = r.class_even;
            j["class_odd"] = r.class_odd;
            break;
        case TaskKind::PairSelect:
            j["op"] = static_cast<int>(r.op);
            break;
    }
    return j;
}

/// Everything needed to regenerate the suite bit-exactly.
inline nlohmann::json suite_manifest(const std::vector<TaskSpec>& tasks,
                                     const SplitSet& splits, const SuiteConfig& cfg) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["seed"] = cfg.seed;
    j["n_library"] = cfg.n_library;
    j["n_unseen"] = cfg.n_unseen;
    j["alphabet_size"] = cfg.alphabet_size;
    j["split_sizes"] = {{"library_pool", cfg.lib_pool},
                        {"validation", cfg.n_val},
                        {"test", cfg.n_test},
                        {"pair_library_pool", cfg.pair_lib_pool}};
    j["templates"] = kNumTemplates;
    nlohmann::json jt = nlohmann::json::array();
    for (const auto& t : tasks) {
        nlohmann::json o;
        o["task_id"] = t.task_id;
        o["name"] = t.name;
        o["kind"] = kind_name(t.kind);
        o["domain"] = domain_name(t.domain);
        o["library"] = t.is_library;
        o["alphabet_base"] = t.alphabet_base;
        o["alphabet_size"] = t.alphabet_size;
        o["answer_alphabet"] = t.answer_alphabet;
        o["rule"] = rule_to_json(t.rule);
        nlohmann::json fam = nlohmann::json::array();
        for (const auto& r : t.family) fam.push_back(rule_to_json(r));
        o["family"] = fam;
        const auto& ts = splits.of(t);
        o["splits"] = {{"library_pool", ts.library_pool},
                       {"validation", ts.validation},
                       {"test", ts.test}};
        jt.push_back(std::move(o));
    }
    j["tasks"] = std::move(jt);
    return j;
}

}  // namespace taskvec
