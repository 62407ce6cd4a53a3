#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include "tlab/layout/layout.hpp"

namespace tlab {

struct ModelConfig {
    std::size_t layers = 2;
    std::size_t heads = 4;
    std::size_t hidden = 64;
    std::size_t vocab_size = 64;
    std::size_t max_positions = kMaxInputLength;
    std::size_t type_count = 2;
    std::size_t ffn_multiplier = 4;
    bool tie_output_embedding = true;

    std::size_t head_dim() const { return hidden / heads; }
    std::size_t ffn_hidden() const { return ffn_multiplier * hidden; }

    void validate() const {
        if (heads == 0 || hidden == 0 || hidden % heads != 0)
            throw std::invalid_argument("invalid config: hidden size " + std::to_string(hidden) +
                                        " not divisible by head count " + std::to_string(heads));
        if (vocab_size < 7)
            throw std::invalid_argument("invalid config: vocab_size must cover the special tokens (>= 7)");
        if (max_positions == 0 || max_positions > kMaxInputLength)
            throw std::invalid_argument("invalid config: max_positions must lie in [1, 128]");
        if (type_count < 2) throw std::invalid_argument("invalid config: type_count must be at least 2");
        if (ffn_multiplier == 0) throw std::invalid_argument("invalid config: ffn_multiplier must be positive");
    }

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace tlab
