#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <vector>

#include "tlab/metrics/ngram.hpp"

namespace tlab {

/// Per-sample CIDEr (single reference): for n = 1..4, cosine similarity of
/// TF-IDF n-gram vectors with idf = ln(N / max(1, df)) taken from the
/// references, averaged over n and scaled by 10.
inline std::vector<double> cider_scores(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
    if (hyps.size() != refs.size()) throw std::invalid_argument("cider: hypothesis and reference counts differ");
    if (hyps.empty()) throw std::invalid_argument("cider: empty corpus");
    constexpr std::size_t kMaxOrder = 4;
    const double N = static_cast<double>(refs.size());
    std::vector<double> out(hyps.size(), 0.0);
    for (std::size_t n = 1; n <= kMaxOrder; ++n) {
        std::map<std::vector<std::string>, std::size_t> df;
        for (const auto& r : refs)
            for (const auto& [g, c] : ngram_counts(r, n)) ++df[g];
        auto idf = [&](const std::vector<std::string>& g) {
            auto it = df.find(g);
            const double d = it == df.end() ? 1.0 : static_cast<double>(it->second);
            return std::log(N / d);
        };
        for (std::size_t i = 0; i < hyps.size(); ++i) {
            const auto h = ngram_counts(hyps[i], n);
            const auto r = ngram_counts(refs[i], n);
            std::map<std::vector<std::string>, double> rv;
            double rnorm = 0, hnorm = 0, dotp = 0;
            for (const auto& [g, c] : r) {
                const double w = static_cast<double>(c) * idf(g);
                rv[g] = w;
                rnorm += w * w;
            }
            for (const auto& [g, c] : h) {
                const double w = static_cast<double>(c) * idf(g);
                hnorm += w * w;
                auto it = rv.find(g);
                if (it != rv.end()) dotp += w * it->second;
            }
            if (hnorm > 0 && rnorm > 0) out[i] += dotp / (std::sqrt(hnorm) * std::sqrt(rnorm));
        }
    }
    for (auto& v : out) v = v / static_cast<double>(kMaxOrder) * 10.0;
    return out;
}

inline double cider(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
    const auto s = cider_scores(hyps, refs);
    double total = 0;
    for (double v : s) total += v;
    return total / static_cast<double>(s.size());
}

}  // namespace tlab
