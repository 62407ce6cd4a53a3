#pragma once

#include <cstddef>
#include <iostream>
#include <set>
#include <stdexcept>
#include <vector>

#include "tlab/metrics/ngram.hpp"

namespace tlab {

/// Unique n-grams over total n-grams across all hypotheses. Defined as 0
/// (with a warning) when no hypothesis has n tokens.
inline double distinct_n(const std::vector<Sentence>& hyps, std::size_t n, bool warn = true) {
    if (hyps.empty()) throw std::invalid_argument("distinct: empty corpus");
    std::set<std::vector<std::string>> unique;
    std::size_t total = 0;
    for (const auto& h : hyps) {
        for (const auto& [g, c] : ngram_counts(h, n)) unique.insert(g);
        total += ngram_total(h, n);
    }
    if (total == 0) {
        if (warn) std::cerr << "warning: distinct-" << n << " undefined (no hypothesis has " << n << " tokens); using 0\n";
        return 0.0;
    }
    return static_cast<double>(unique.size()) / static_cast<double>(total);
}

/// Within-sentence distinct-n, the per-sample counterpart used for t-tests.
inline double sentence_distinct(const Sentence& hyp, std::size_t n) {
    const std::size_t total = ngram_total(hyp, n);
    if (total == 0) return 0.0;
    return static_cast<double>(ngram_counts(hyp, n).size()) / static_cast<double>(total);
}

inline double avg_len(const std::vector<Sentence>& hyps) {
    if (hyps.empty()) throw std::invalid_argument("avg_len: empty corpus");
    double total = 0;
    for (const auto& h : hyps) total += static_cast<double>(h.size());
    return total / static_cast<double>(hyps.size());
}

}  // namespace tlab
