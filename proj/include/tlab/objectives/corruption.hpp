#pragma once

#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tlab/data/vocab.hpp"
#include "tlab/layout/conflicts.hpp"
#include "tlab/numcore/rng.hpp"

namespace tlab {

/// Each index of [lo, hi) joins the set with probability `rate`; an empty
/// draw forces one uniformly chosen index in.
inline MaskedSet sample_masked(std::size_t lo, std::size_t hi, double rate, Rng& rng) {
    if (!(rate > 0.0 && rate <= 1.0)) throw std::invalid_argument("mask rate must lie in (0, 1]");
    if (lo >= hi) throw std::invalid_argument("sample_masked: empty range");
    MaskedSet out;
    for (std::size_t i = lo; i < hi; ++i)
        if (uniform_unit(rng) < rate) out.insert(i);
    if (out.empty()) out.insert(lo + uniform_index(rng, hi - lo));
    return out;
}

/// Replaces a random subset of `y` with [MASK].
inline std::pair<std::vector<int>, MaskedSet> mlm_corrupt_target(std::vector<int> y, double rate, Rng& rng) {
    auto masked = sample_masked(0, y.size(), rate, rng);
    for (auto i : masked) y[i] = special::kMask;
    return {std::move(y), std::move(masked)};
}

struct PfPattern {
    std::size_t boundary = 0;
    MaskedSet masked;  ///< indices >= boundary
};

/// Uniform boundary from {0, k, 2k, ...} below T, then masking of the
/// left-to-right part [boundary, T).
inline PfPattern pf_sample_pattern(std::size_t T, std::size_t k, double rate, Rng& rng) {
    if (k == 0) throw std::invalid_argument("interval must be at least 1");
    if (T == 0) throw std::invalid_argument("pf_sample_pattern: empty target");
    const std::size_t choices = (T - 1) / k + 1;
    PfPattern p;
    p.boundary = uniform_index(rng, choices) * k;
    p.masked = sample_masked(p.boundary, T, rate, rng);
    return p;
}

/// Pretraining-style corruption over `ids`: each eligible position is
/// selected with probability `rate` (at least one), then replaced by
/// [MASK] 80% of the time, a random non-special token 10%, or kept 10%.
inline MaskedSet bert_corrupt(std::vector<int>& ids, const std::vector<std::size_t>& eligible, double rate,
                              std::size_t vocab_size, Rng& rng) {
    if (eligible.empty()) throw std::invalid_argument("bert_corrupt: nothing to corrupt");
    auto picks = sample_masked(0, eligible.size(), rate, rng);
    MaskedSet out;
    for (auto k : picks) {
        const std::size_t p = eligible[k];
        out.insert(p);
        const double u = uniform_unit(rng);
        if (u < 0.8)
            ids[p] = special::kMask;
        else if (u < 0.9 && vocab_size > special::kCount)
            ids[p] = static_cast<int>(special::kCount + uniform_index(rng, vocab_size - special::kCount));
    }
    return out;
}

}  // namespace tlab
