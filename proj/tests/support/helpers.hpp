#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tlab/tlab.hpp"

namespace tlab::test_support {

inline ModelConfig tiny_config(std::size_t layers = 2, std::size_t hidden = 16, std::size_t heads = 2,
                               std::size_t vocab = 24) {
    ModelConfig c;
    c.layers = layers;
    c.hidden = hidden;
    c.heads = heads;
    c.vocab_size = vocab;
    return c;
}

template <typename T = float>
TransformerModel<T> tiny_model(Framework f, std::uint64_t seed = 1, const ModelConfig& c = tiny_config(),
                               double stddev = 0.02) {
    return init_model<T>(c, seed, is_encoder_decoder(f), stddev);
}

/// Uniform ids from the non-special range [kCount, vocab).
inline std::vector<int> random_words(Rng& rng, std::size_t n, std::size_t vocab) {
    std::vector<int> out(n);
    for (auto& v : out) v = static_cast<int>(special::kCount + uniform_index(rng, vocab - special::kCount));
    return out;
}

/// Distinct non-special ids.
inline std::vector<int> distinct_words(Rng& rng, std::size_t n, std::size_t vocab) {
    std::vector<int> pool;
    for (std::size_t i = special::kCount; i < vocab; ++i) pool.push_back(static_cast<int>(i));
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(n);
    return pool;
}

/// Logits of every decoder-side position of one (unbatched) input.
template <typename T>
Tensor<T> full_logits(const TransformerModel<T>& model, const FrameworkLayout& layout, const FrameworkMask& mask,
                      std::span<const int> tokens, std::span<const int> encoder_tokens = {}) {
    NoGradGuard guard;
    auto dec = ModelInput::single(layout.sequence, tokens, mask.self);
    if (!layout.encoder) return forward(model, dec);
    auto enc = encode(model, ModelInput::single(*layout.encoder, encoder_tokens, *mask.encoder));
    dec.cross_masks.push_back(*mask.cross);
    return forward(model, dec, &enc);
}

template <typename T>
std::vector<T> row_of(const Tensor<T>& m, std::size_t r) {
    return std::vector<T>(m.data().begin() + static_cast<std::ptrdiff_t>(r * m.cols()),
                          m.data().begin() + static_cast<std::ptrdiff_t>((r + 1) * m.cols()));
}

/// Parameters probed by finite differences. Attention key biases are left
/// out: softmax is invariant to a shift shared by a whole score row, so their
/// gradient is identically zero and the relative error is pure round-off.
/// `key_bias` receives them for a separate zero-gradient assertion.
template <typename T>
std::vector<Tensor<T>> gradcheck_params(const ParameterSet<T>& params, std::vector<Tensor<T>>* key_bias = nullptr) {
    std::vector<Tensor<T>> out;
    for (const auto& [name, t] : params.tensors()) {
        const bool bk = name.ends_with("attn.bk");
        if (bk) {
            if (key_bias) key_bias->push_back(t);
        } else {
            out.push_back(t);
        }
    }
    return out;
}

}  // namespace tlab::test_support
