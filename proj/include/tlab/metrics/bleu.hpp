#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "tlab/metrics/ngram.hpp"

namespace tlab {

namespace detail {

inline std::size_t clipped_matches(const Sentence& hyp, const Sentence& ref, std::size_t n) {
    const auto h = ngram_counts(hyp, n);
    const auto r = ngram_counts(ref, n);
    std::size_t m = 0;
    for (const auto& [g, c] : h) {
        auto it = r.find(g);
        if (it != r.end()) m += std::min(c, it->second);
    }
    return m;
}

inline double brevity_penalty(double hyp_len, double ref_len) {
    if (hyp_len <= 0) return 0.0;
    return std::exp(std::min(0.0, 1.0 - ref_len / hyp_len));
}

}  // namespace detail

/// Corpus BLEU over orders 1..n (uniform weights), scaled to [0, 100].
inline double bleu_n(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs, std::size_t n) {
    if (hyps.size() != refs.size()) throw std::invalid_argument("bleu: hypothesis and reference counts differ");
    if (hyps.empty()) throw std::invalid_argument("bleu: empty corpus");
    if (n == 0) throw std::invalid_argument("bleu: order must be at least 1");
    double log_sum = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        std::size_t matches = 0, total = 0;
        for (std::size_t i = 0; i < hyps.size(); ++i) {
            matches += detail::clipped_matches(hyps[i], refs[i], k);
            total += ngram_total(hyps[i], k);
        }
        if (matches == 0 || total == 0) return 0.0;
        log_sum += std::log(static_cast<double>(matches) / static_cast<double>(total));
    }
    double hyp_len = 0, ref_len = 0;
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        hyp_len += static_cast<double>(hyps[i].size());
        ref_len += static_cast<double>(refs[i].size());
    }
    return 100.0 * detail::brevity_penalty(hyp_len, ref_len) * std::exp(log_sum / static_cast<double>(n));
}

/// Sentence BLEU with add-one smoothing on orders >= 2, scaled to [0, 100].
inline double sentence_bleu(const Sentence& hyp, const Sentence& ref, std::size_t n) {
    if (n == 0) throw std::invalid_argument("bleu: order must be at least 1");
    if (hyp.empty()) return 0.0;
    double log_sum = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        const double m = static_cast<double>(detail::clipped_matches(hyp, ref, k));
        const double t = static_cast<double>(ngram_total(hyp, k));
        double p;
        if (k == 1)
            p = m / t;
        else
            p = (m + 1.0) / (t + 1.0);
        if (p <= 0) return 0.0;
        log_sum += std::log(p);
    }
    return 100.0 * detail::brevity_penalty(static_cast<double>(hyp.size()), static_cast<double>(ref.size())) *
           std::exp(log_sum / static_cast<double>(n));
}

}  // namespace tlab
