#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tlab/numcore/rng.hpp"
#include "tlab/transformer/model.hpp"
#include "tlab/transformer/params.hpp"

namespace tlab {

inline constexpr double kInitStd = 0.02;

template <typename T>
Tensor<T> init_tensor(const ParamSpec& spec, Rng& rng, double stddev) {
    auto t = Tensor<T>::zeros(spec.shape);
    auto d = t.data();
    switch (spec.role) {
        case ParamRole::Gain: std::fill(d.begin(), d.end(), T(1)); break;
        case ParamRole::Bias: break;
        case ParamRole::Weight:
        case ParamRole::Embedding: {
            std::normal_distribution<double> normal(0.0, stddev);
            for (auto& v : d) v = static_cast<T>(normal(rng));
            break;
        }
    }
    return t;
}

/// Normal(0, stddev) weights and embeddings, zero biases, unit gains;
/// deterministic in `seed`.
template <typename T = float>
ParameterSet<T> init_parameters(const ModelConfig& config, bool encoder_decoder, std::uint64_t seed,
                                double stddev = kInitStd) {
    config.validate();
    Rng rng = make_rng(seed);
    ParameterSet<T> out;
    for (const auto& spec : parameter_specs(config, encoder_decoder)) out.set(spec.name, init_tensor<T>(spec, rng, stddev));
    return out;
}

template <typename T = float>
TransformerModel<T> init_model(const ModelConfig& config, std::uint64_t seed, bool encoder_decoder = false,
                               double stddev = kInitStd) {
    return TransformerModel<T>{config, encoder_decoder, init_parameters<T>(config, encoder_decoder, seed, stddev)};
}

}  // namespace tlab
