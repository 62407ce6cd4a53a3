#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/layout/attention_mask.hpp"
#include "tlab/layout/framework.hpp"
#include "tlab/layout/layout.hpp"

namespace tlab {

/// One supervised sequence: layout, (corrupted) input ids, attention masks
/// and the gold token at each loss position. For ED, `tokens` is the
/// decoder input and `encoder_tokens` the encoder input.
struct TrainingExample {
    FrameworkLayout layout;
    std::vector<int> tokens;
    std::vector<int> encoder_tokens;
    FrameworkMask mask;
    std::vector<std::size_t> loss_positions;
    std::vector<int> gold;

    Framework framework() const { return layout.framework; }
    std::size_t length() const { return layout.sequence.size(); }
    std::size_t encoder_length() const { return layout.encoder ? layout.encoder->size() : 0; }

    void validate() const {
        if (loss_positions.empty()) throw std::invalid_argument("training example has no loss positions");
        if (loss_positions.size() != gold.size()) throw std::invalid_argument("training example: gold/loss size mismatch");
        if (tokens.size() != layout.sequence.size()) throw std::invalid_argument("training example: token count mismatch");
        for (auto p : loss_positions)
            if (p >= tokens.size() || layout.sequence[p].stream == Stream::Pad)
                throw std::invalid_argument("training example: loss position outside sequence");
    }
};

namespace detail {

inline AttentionMask pad_square(const AttentionMask& m, std::size_t n) {
    AttentionMask out = AttentionMask::square(n);
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) out.set(i, j, m.allowed(i, j));
    for (std::size_t i = m.rows(); i < n; ++i) out.set(i, i, true);
    return out;
}

inline void pad_sequence(SequenceLayout& layout, std::vector<int>& tokens, std::size_t n) {
    while (layout.positions.size() < n) {
        layout.positions.push_back({Stream::Pad, 0, 0, 0});
        tokens.push_back(0);
    }
}

}  // namespace detail

/// Extends an example with isolated pad positions up to `length` (and
/// `encoder_length` on the encoder side). Pad rows attend only to
/// themselves; no real row attends to a pad column.
inline TrainingExample pad_example(TrainingExample ex, std::size_t length, std::size_t encoder_length = 0) {
    if (length < ex.length() || (ex.layout.encoder && encoder_length < ex.encoder_length()))
        throw std::invalid_argument("pad_example: target length shorter than example");
    if (length > kMaxInputLength || encoder_length > kMaxInputLength)
        throw std::length_error("padded length exceeds maximum input length " + std::to_string(kMaxInputLength));
    const std::size_t n0 = ex.length();
    detail::pad_sequence(ex.layout.sequence, ex.tokens, length);
    ex.mask.self = detail::pad_square(ex.mask.self, length);
    if (ex.layout.encoder) {
        const std::size_t m0 = ex.encoder_length();
        detail::pad_sequence(*ex.layout.encoder, ex.encoder_tokens, encoder_length);
        ex.mask.encoder = detail::pad_square(*ex.mask.encoder, encoder_length);
        AttentionMask cross(length, encoder_length);
        for (std::size_t i = 0; i < length; ++i)
            for (std::size_t j = 0; j < m0; ++j) cross.set(i, j, i < n0 ? ex.mask.cross->allowed(i, j) : j == 0);
        ex.mask.cross = std::move(cross);
    }
    return ex;
}

}  // namespace tlab
