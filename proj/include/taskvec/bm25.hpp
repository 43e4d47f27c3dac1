// Copyright (c) 2026 taskvec authors
// SPDX-License-Identifier: Apache-2.0
//
// Okapi BM25 over integer-token documents (k1=1.2, b=0.75, idf floored at
// zero). Used by the demonstration-retrieval baseline.

#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

#include "taskvec/common.hpp"

namespace taskvec {

struct Bm25Index {
    double k1 = 1.2;
    double b = 0.75;
    std::vector<std::vector<Token>> docs;
    std::map<Token, int> doc_freq;
    double avg_len = 0.0;

    static Bm25Index build(std::vector<std::vector<Token>> documents,
                           double k1 = 1.2, double b = 0.75) {
        if (documents.empty()) throw ArgumentError("Bm25Index: no documents");
        Bm25Index ix;
        ix.k1 = k1;
        ix.b = b;
        ix.docs = std::move(documents);
        std::size_t total = 0;
        for (const auto& d : ix.docs) {
            total += d.size();
            std::vector<Token> uniq = d;
            std::sort(uniq.begin(), uniq.end());
            uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
            for (Token t : uniq) ix.doc_freq[t] += 1;
        }
        ix.avg_len = static_cast<double>(total) / static_cast<double>(ix.docs.size());
        return ix;
    }

    double idf(Token term) const {
        const auto it = doc_freq.find(term);
        const double df = it == doc_freq.end() ? 0.0 : it->second;
        const double n = static_cast<double>(docs.size());
        return std::max(0.0, std::log((n - df + 0.5) / (df + 0.5)));
    }

    double score(const std::vector<Token>& query, std::size_t doc_id) const {
        const auto& doc = docs.at(doc_id);
        const double norm_len = static_cast<double>(doc.size()) / avg_len;
        // Distinct query terms with their in-query counts.
        std::map<Token, int> qterms;
        for (Token t : query) qterms[t] += 1;
        double s = 0.0;
        for (const auto& [term, qf] : qterms) {
            int tf = 0;
            for (Token t : doc) tf += t == term ? 1 : 0;
            if (tf == 0) continue;
            const double w = idf(term);
            const double f = static_cast<double>(tf);
            s += w * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * norm_len)) * qf;
        }
        return s;
    }

    /// Doc ids of the k best-scoring documents, score descending with doc
    /// id ascending on ties.
    std::vector<std::size_t> top_k(const std::vector<Token>& query, std::size_t k) const {
        std::vector<std::pair<double, std::size_t>> scored;
        scored.reserve(docs.size());
        for (std::size_t i = 0; i < docs.size(); ++i) scored.emplace_back(score(query, i), i);
        std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < std::min(k, scored.size()); ++i) {
            out.push_back(scored[i].second);
        }
        return out;
    }
};

}  // namespace taskvec
