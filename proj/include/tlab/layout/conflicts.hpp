#pragma once

#include <cstddef>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tlab {

/// Target indices replaced by [MASK] in one training sample.
using MaskedSet = std::set<std::size_t>;

enum class TargetPrediction {
    /// Every generation step re-reads the whole prefix bidirectionally, so the
    /// prediction of y_i must not see anything after i while earlier prefix
    /// positions must see everything up to the predicted index.
    BidirectionalPerStep,
    /// Plain left-to-right target attention: masks never interact.
    LeftToRight,
};

/// Ordered pairs (i, j), i < j, of masked indices that cannot share one
/// attention matrix. Under per-step bidirectional prediction, y_i's step
/// forbids row i from column j while y_j's step requires it, so every pair
/// of distinct masked indices conflicts.
inline std::vector<std::pair<std::size_t, std::size_t>> detect_mask_conflict(
    const MaskedSet& masked, std::size_t target_len,
    TargetPrediction mode = TargetPrediction::BidirectionalPerStep) {
    for (std::size_t i : masked)
        if (i >= target_len)
            throw std::invalid_argument("masked index " + std::to_string(i) + " outside target of length " +
                                        std::to_string(target_len));
    std::vector<std::pair<std::size_t, std::size_t>> out;
    if (mode == TargetPrediction::LeftToRight) return out;
    for (auto a = masked.begin(); a != masked.end(); ++a)
        for (auto b = std::next(a); b != masked.end(); ++b) out.emplace_back(*a, *b);
    return out;
}

}  // namespace tlab
