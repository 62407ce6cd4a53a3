#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/layout/framework.hpp"

namespace tlab {

/// Target indices whose hidden states must be (re)computed at decoding step
/// `t`. The slot t-1 changes from a placeholder to the emitted token and the
/// new query slot t appears; interval frameworks additionally recompute the
/// whole prefix whenever t lands on an interval boundary.
inline std::vector<std::size_t> incremental_update_range(Framework framework, long long t, std::size_t interval) {
    if (t < 0) throw std::invalid_argument("incremental_update_range: negative step " + std::to_string(t));
    const auto step = static_cast<std::size_t>(t);
    if (is_encoder_decoder(framework)) return {step};
    if (uses_intervals(framework)) {
        if (interval == 0) throw std::invalid_argument("interval must be at least 1");
        if (step > 0 && step % interval == 0) {
            std::vector<std::size_t> all(step + 1);
            for (std::size_t i = 0; i <= step; ++i) all[i] = i;
            return all;
        }
    }
    if (step == 0) return {0};
    return {step - 1, step};
}

/// Bidirectional block boundary in effect while predicting target index `t`.
inline std::size_t interval_boundary(std::size_t t, std::size_t interval) { return (t / interval) * interval; }

}  // namespace tlab
