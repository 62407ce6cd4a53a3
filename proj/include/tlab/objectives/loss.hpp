#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "tlab/numcore/ops.hpp"
#include "tlab/objectives/example.hpp"
#include "tlab/transformer/model.hpp"

namespace tlab {

/// Model inputs for a batch of examples padded to their longest member.
struct PreparedBatch {
    ModelInput decoder;
    ModelInput encoder;  ///< empty unless encoder-decoder
    std::vector<std::size_t> loss_rows;
    std::vector<int> gold;
};

inline PreparedBatch prepare_batch(std::span<const TrainingExample> examples) {
    if (examples.empty()) throw std::invalid_argument("batch_loss: empty batch");
    const bool ed = examples[0].layout.encoder.has_value();
    std::size_t n = 0, m = 0;
    for (const auto& ex : examples) {
        if (ex.layout.encoder.has_value() != ed)
            throw std::invalid_argument("batch mixes encoder-decoder and decoder-only examples");
        ex.validate();
        n = std::max(n, ex.length());
        m = std::max(m, ex.encoder_length());
    }
    PreparedBatch out;
    for (std::size_t b = 0; b < examples.size(); ++b) {
        const auto padded = pad_example(examples[b], n, m);
        out.decoder.append(padded.layout.sequence, padded.tokens, padded.mask.self);
        if (ed) {
            out.decoder.cross_masks.push_back(*padded.mask.cross);
            out.encoder.append(*padded.layout.encoder, padded.encoder_tokens, *padded.mask.encoder);
        }
        for (std::size_t k = 0; k < padded.loss_positions.size(); ++k) {
            out.loss_rows.push_back(b * n + padded.loss_positions[k]);
            out.gold.push_back(padded.gold[k]);
        }
    }
    return out;
}

/// Logits at the loss positions of a prepared batch, one row per position.
template <typename T>
Tensor<T> loss_logits(const TransformerModel<T>& model, const PreparedBatch& batch) {
    Tensor<T> hidden;
    if (model.encoder_decoder) {
        if (batch.encoder.batch == 0) throw std::invalid_argument("encoder-decoder model given decoder-only batch");
        auto enc = encode(model, batch.encoder);
        hidden = hidden_states(model, batch.decoder, &enc);
    } else {
        if (batch.encoder.batch != 0) throw std::invalid_argument("decoder-only model given encoder-decoder batch");
        hidden = hidden_states(model, batch.decoder);
    }
    return output_logits(model, gather_rows(hidden, std::span<const std::size_t>(batch.loss_rows)));
}

/// Mean cross-entropy over every loss position in the batch.
template <typename T>
Tensor<T> batch_loss(const TransformerModel<T>& model, std::span<const TrainingExample> examples) {
    const auto batch = prepare_batch(examples);
    return cross_entropy(loss_logits(model, batch), std::span<const int>(batch.gold));
}

}  // namespace tlab
