#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iostream>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "tlab/numcore/tensor.hpp"

namespace tlab {

struct GradCheckResult {
    double max_rel_error = 0.0;
    double tolerance = 1e-5;
    std::size_t coordinates = 0;
    bool reduced_precision = false;

    bool passed() const { return max_rel_error < tolerance; }
};

/// Central-difference gradient check of `loss_fn` with respect to `params`,
/// using the fourth-order stencil over x +- h and x +- 2h.
/// At most `max_coords` coordinates per tensor are probed (evenly strided).
/// Single precision is allowed but widens the tolerance to 1e-2.
template <typename T>
GradCheckResult finite_difference_check(const std::function<Tensor<T>()>& loss_fn, std::vector<Tensor<T>> params,
                                        double h = 1e-4, std::size_t max_coords = 64) {
    if (!(h >= 1e-6 && h <= 1e-4)) throw std::invalid_argument("finite_difference_check: h must lie in [1e-6, 1e-4]");
    GradCheckResult result;
    if constexpr (!std::is_same_v<T, double>) {
        result.reduced_precision = true;
        result.tolerance = 1e-2;
        std::cerr << "warning: gradient check in reduced precision; tolerance widened to 1e-2\n";
    }

    for (auto& p : params) p.zero_grad();
    {
        auto loss = loss_fn();
        backward(loss);
    }

    for (auto& p : params) {
        const std::size_t n = p.numel();
        const std::size_t stride = std::max<std::size_t>(1, n / std::max<std::size_t>(1, max_coords));
        const std::vector<T> analytic(p.grad().begin(), p.grad().end());
        for (std::size_t i = 0; i < n; i += stride) {
            const T original = p.data()[i];
            double f[4];  // loss at x - 2h, x - h, x + h, x + 2h
            const double offsets[4] = {-2.0, -1.0, 1.0, 2.0};
            {
                NoGradGuard guard;
                for (int k = 0; k < 4; ++k) {
                    p.data()[i] = original + static_cast<T>(offsets[k] * h);
                    f[k] = static_cast<double>(loss_fn().item());
                }
                p.data()[i] = original;
            }
            for (double v : f)
                if (!std::isfinite(v)) throw std::runtime_error("finite_difference_check: non-finite loss during perturbation");
            const double numeric = (8.0 * (f[2] - f[1]) - (f[3] - f[0])) / (12.0 * h);
            const double a = static_cast<double>(analytic[i]);
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
            result.max_rel_error = std::max(result.max_rel_error, std::abs(a - numeric) / denom);
            ++result.coordinates;
        }
    }
    return result;
}

}  // namespace tlab
