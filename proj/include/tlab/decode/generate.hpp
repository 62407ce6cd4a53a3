#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

#include "tlab/decode/beam.hpp"

namespace tlab {

/// Decodes every source, spreading inputs over `threads` workers; output
/// order follows input order.
inline std::vector<DecodeResult> generate_all(const TransformerModel<float>& model, Framework framework,
                                              const std::vector<std::vector<int>>& sources, const DecodeParams& params,
                                              std::size_t threads = 1) {
    std::vector<DecodeResult> out(sources.size());
    threads = std::max<std::size_t>(1, std::min(threads, sources.size()));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= sources.size()) return;
            try {
                out[i] = beam_search(model, framework, sources[i], params);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                next = sources.size();
                return;
            }
        }
    };
    if (threads == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t k = 0; k < threads; ++k) pool.emplace_back(work);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
    return out;
}

inline double mean_length(const std::vector<DecodeResult>& results) {
    if (results.empty()) return 0.0;
    double total = 0;
    for (const auto& r : results) total += static_cast<double>(r.tokens.size());
    return total / static_cast<double>(results.size());
}

struct CalibrationPoint {
    std::size_t min_len;
    double avg_len;
};

struct Calibration {
    std::size_t min_len = 1;
    double target_avg_len = 0;
    std::vector<CalibrationPoint> sweep;
};

/// Sweeps min_len upward from 1 and keeps the value whose mean generated
/// length is closest to `target_avg_len` (ties to the smaller min_len).
/// Stops early once generations overshoot the target.
inline Calibration calibrate_min_len(const TransformerModel<float>& model, Framework framework,
                                     const std::vector<std::vector<int>>& sources, double target_avg_len,
                                     DecodeParams params, std::size_t max_min_len, std::size_t threads = 1) {
    Calibration cal;
    cal.target_avg_len = target_avg_len;
    double best_gap = INFINITY;
    for (std::size_t m = 1; m <= std::min(max_min_len, params.max_len); ++m) {
        params.min_len = m;
        const double avg = mean_length(generate_all(model, framework, sources, params, threads));
        cal.sweep.push_back({m, avg});
        const double gap = std::fabs(avg - target_avg_len);
        if (gap < best_gap) {
            best_gap = gap;
            cal.min_len = m;
        }
        if (avg >= target_avg_len) break;
    }
    return cal;
}

}  // namespace tlab
