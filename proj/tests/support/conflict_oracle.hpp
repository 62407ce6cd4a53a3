#pragma once

// Brute-force satisfiability check for shared target masks. Predicting a
// masked y_t with the whole generated prefix re-read bidirectionally pins
// every target row r <= t to "see exactly columns <= t". Two predictions can
// share one matrix iff some assignment of each row satisfies both sets of
// pins; rows are independent, so each row's 2^T assignments are enumerated.

#include <cstddef>
#include <cstdint>
#include <set>
#include <utility>
#include <vector>

namespace tlab::test_support {

struct Pin {
    std::size_t row, col;
    bool allow;
};

inline std::vector<Pin> prediction_pins(std::size_t t, std::size_t T) {
    std::vector<Pin> out;
    for (std::size_t r = 0; r <= t; ++r)
        for (std::size_t c = 0; c < T; ++c) out.push_back({r, c, c <= t});
    return out;
}

inline bool satisfiable(const std::vector<Pin>& pins, std::size_t T) {
    for (std::size_t r = 0; r < T; ++r) {
        bool row_ok = false;
        for (std::uint32_t bits = 0; bits < (1u << T) && !row_ok; ++bits) {
            bool ok = true;
            for (const auto& p : pins)
                if (p.row == r && (((bits >> p.col) & 1u) != 0) != p.allow) ok = false;
            row_ok = ok;
        }
        if (!row_ok) return false;
    }
    return true;
}

inline std::vector<std::pair<std::size_t, std::size_t>> conflict_oracle(const std::set<std::size_t>& masked,
                                                                        std::size_t T) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (auto i : masked)
        for (auto j : masked) {
            if (j <= i) continue;
            auto pins = prediction_pins(i, T);
            auto pj = prediction_pins(j, T);
            pins.insert(pins.end(), pj.begin(), pj.end());
            if (!satisfiable(pins, T)) out.emplace_back(i, j);
        }
    return out;
}

}  // namespace tlab::test_support
