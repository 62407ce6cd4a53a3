#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/numcore/tensor.hpp"

namespace tlab {

template <typename T>
using NamedTensors = std::map<std::string, Tensor<T>>;

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename T>
struct OptimizerState {
    struct Moments {
        std::vector<T> first;
        std::vector<T> second;
    };

    AdamConfig config;
    std::uint64_t step = 0;
    std::map<std::string, Moments> moments;
};

/// One bias-corrected Adam update of every parameter from its accumulated
/// gradient. Parameters without a gradient buffer are left alone.
template <typename T>
void adam_step(NamedTensors<T>& params, OptimizerState<T>& state) {
    for (auto& [name, p] : params) {
        if (!p.has_grad()) continue;
        for (T g : p.grad())
            if (!std::isfinite(g)) throw std::runtime_error("non-finite gradient in parameter '" + name + "'");
    }
    state.step += 1;
    const auto& c = state.config;
    const T b1 = static_cast<T>(c.beta1), b2 = static_cast<T>(c.beta2);
    const T lr = static_cast<T>(c.lr), eps = static_cast<T>(c.eps);
    const T corr1 = T(1) - static_cast<T>(std::pow(c.beta1, static_cast<double>(state.step)));
    const T corr2 = T(1) - static_cast<T>(std::pow(c.beta2, static_cast<double>(state.step)));
    for (auto& [name, p] : params) {
        if (!p.has_grad()) continue;
        auto& mom = state.moments[name];
        if (mom.first.size() != p.numel()) {
            if (!mom.first.empty())
                throw std::invalid_argument("optimizer moments for '" + name + "' do not match parameter shape");
            mom.first.assign(p.numel(), T(0));
            mom.second.assign(p.numel(), T(0));
        }
        auto data = p.data();
        auto grad = p.grad();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const T g = grad[i];
            mom.first[i] = b1 * mom.first[i] + (T(1) - b1) * g;
            mom.second[i] = b2 * mom.second[i] + (T(1) - b2) * g * g;
            const T mhat = mom.first[i] / corr1;
            const T vhat = mom.second[i] / corr2;
            data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

template <typename T>
void zero_grads(NamedTensors<T>& params) {
    for (auto& [_, p] : params) p.zero_grad();
}

}  // namespace tlab
