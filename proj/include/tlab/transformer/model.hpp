#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tlab/layout/attention_mask.hpp"
#include "tlab/layout/layout.hpp"
#include "tlab/numcore/ops.hpp"
#include "tlab/transformer/config.hpp"
#include "tlab/transformer/params.hpp"

namespace tlab {

/// Configuration plus weights. `encoder_decoder` selects the two-stack
/// parameter naming (enc.* / dec.*) used by ED.
template <typename T>
struct TransformerModel {
    ModelConfig config;
    bool encoder_decoder = false;
    ParameterSet<T> params;

    std::string decoder_prefix() const { return encoder_decoder ? "dec." : ""; }
};

/// A batch of equal-length sequences flattened row-major: entry b * length + p
/// describes position p of sequence b.
struct ModelInput {
    std::size_t batch = 0;
    std::size_t length = 0;
    std::vector<int> tokens;
    std::vector<std::size_t> positions;
    std::vector<int> types;
    std::vector<AttentionMask> masks;        ///< self-attention, one per sequence
    std::vector<AttentionMask> cross_masks;  ///< decoder-to-encoder, ED only

    /// Appends one sequence described by `layout`; pad slots take token 0.
    void append(const SequenceLayout& layout, std::span<const int> seq_tokens, AttentionMask mask) {
        if (seq_tokens.size() != layout.size())
            throw std::invalid_argument("token count " + std::to_string(seq_tokens.size()) +
                                        " does not match layout length " + std::to_string(layout.size()));
        if (mask.rows() != layout.size() || mask.cols() != layout.size())
            throw std::invalid_argument("mask dimension does not match layout length");
        if (batch == 0) length = layout.size();
        if (layout.size() != length) throw std::invalid_argument("ragged batch: pad sequences to a common length");
        for (std::size_t p = 0; p < layout.size(); ++p) {
            const auto& r = layout[p];
            const bool pad = r.stream == Stream::Pad;
            tokens.push_back(pad ? 0 : seq_tokens[p]);
            positions.push_back(pad ? 0 : r.position_index);
            types.push_back(pad ? 0 : r.type_id);
        }
        masks.push_back(std::move(mask));
        ++batch;
    }

    static ModelInput single(const SequenceLayout& layout, std::span<const int> seq_tokens, AttentionMask mask) {
        ModelInput in;
        in.append(layout, seq_tokens, std::move(mask));
        return in;
    }
};

namespace detail {

template <typename T>
Tensor<T> embed_rows(const ModelConfig& config, const ParameterSet<T>& params, std::span<const int> tokens,
                     std::span<const std::size_t> positions, std::span<const int> types) {
    if (tokens.size() != positions.size() || tokens.size() != types.size())
        throw std::invalid_argument("embed: tokens, positions and types differ in length");
    std::vector<int> pos(positions.size());
    for (std::size_t i = 0; i < positions.size(); ++i) {
        if (positions[i] >= config.max_positions)
            throw std::out_of_range("position index " + std::to_string(positions[i]) + " exceeds max_positions " +
                                    std::to_string(config.max_positions));
        pos[i] = static_cast<int>(positions[i]);
    }
    for (int t : types)
        if (t < 0 || static_cast<std::size_t>(t) >= config.type_count)
            throw std::out_of_range("type id " + std::to_string(t) + " outside type table");
    auto tok = embedding(params.get("emb.token"), tokens);
    auto p = embedding(params.get("emb.position"), std::span<const int>(pos));
    auto ty = embedding(params.get("emb.type"), types);
    return add(add(tok, p), ty);
}

template <typename T>
Tensor<T> norm(const ParameterSet<T>& params, const std::string& prefix, const Tensor<T>& x) {
    return layer_norm(x, params.get(prefix + "gain"), params.get(prefix + "bias"));
}

template <typename T>
Tensor<T> feed_forward(const ParameterSet<T>& params, const std::string& prefix, const Tensor<T>& x) {
    auto h = gelu(linear(x, params.get(prefix + "w1"), params.get(prefix + "b1")));
    return linear(h, params.get(prefix + "w2"), params.get(prefix + "b2"));
}

}  // namespace detail

/// H^0 = token + position + type embedding for every position of `layout`.
template <typename T>
Tensor<T> embed_input(const TransformerModel<T>& model, const SequenceLayout& layout, std::span<const int> tokens) {
    auto in = ModelInput::single(layout, tokens, AttentionMask::square(layout.size(), true));
    return detail::embed_rows(model.config, model.params, in.tokens, in.positions, in.types);
}

/// Multi-head masked attention with queries from `x` and keys/values from
/// `memory` (x itself for self-attention); heads are concatenated and
/// projected by the output matrix. `prefix` names the sub-layer, e.g.
/// "layer0.attn.".
template <typename T>
Tensor<T> attention_sublayer(const ModelConfig& config, const ParameterSet<T>& params, const std::string& prefix,
                             const Tensor<T>& x, const Tensor<T>& memory, std::span<const AttentionMask> masks) {
    auto q = linear(x, params.get(prefix + "wq"), params.get(prefix + "bq"));
    auto k = linear(memory, params.get(prefix + "wk"), params.get(prefix + "bk"));
    auto v = linear(memory, params.get(prefix + "wv"), params.get(prefix + "bv"));
    auto c = attention(q, k, v, config.heads, masks);
    return linear(c, params.get(prefix + "wo"), params.get(prefix + "bo"));
}

/// Runs the block stack named by `prefix` over `h` and applies its final
/// normalization. With `memory` every block also cross-attends to it.
template <typename T>
Tensor<T> run_stack(const ModelConfig& config, const ParameterSet<T>& params, const std::string& prefix, Tensor<T> h,
                    std::span<const AttentionMask> masks, const Tensor<T>* memory = nullptr,
                    std::span<const AttentionMask> cross_masks = {}) {
    for (std::size_t l = 0; l < config.layers; ++l) {
        const std::string p = prefix + "layer" + std::to_string(l) + ".";
        auto a = detail::norm(params, p + "ln1.", h);
        h = add(h, attention_sublayer(config, params, p + "attn.", a, a, masks));
        if (memory) {
            auto x = detail::norm(params, p + "lnx.", h);
            h = add(h, attention_sublayer(config, params, p + "xattn.", x, *memory, cross_masks));
        }
        auto f = detail::norm(params, p + "ln2.", h);
        h = add(h, detail::feed_forward(params, p + "ffn.", f));
    }
    return detail::norm(params, prefix + "ln_f.", h);
}

/// Vocabulary logits from final hidden states.
template <typename T>
Tensor<T> output_logits(const TransformerModel<T>& model, const Tensor<T>& hidden) {
    if (model.config.tie_output_embedding) return matmul_bt(hidden, model.params.get("emb.token"));
    return linear(hidden, model.params.get("head.weight"), model.params.get("head.bias"));
}

/// Encoder outputs (rows b * length + p) under the encoder masks of `input`.
template <typename T>
Tensor<T> encode(const TransformerModel<T>& model, const ModelInput& input) {
    if (!model.encoder_decoder) throw std::invalid_argument("encode: model has no encoder stack");
    auto h = detail::embed_rows(model.config, model.params, input.tokens, input.positions, input.types);
    return run_stack(model.config, model.params, "enc.", h, input.masks);
}

/// Final-layer hidden states of the decoder (or the only) stack.
template <typename T>
Tensor<T> hidden_states(const TransformerModel<T>& model, const ModelInput& input,
                        const Tensor<T>* cross_context = nullptr) {
    if (model.encoder_decoder) {
        if (!cross_context) throw std::invalid_argument("forward: encoder-decoder model needs encoder outputs");
        if (cross_context->cols() != model.config.hidden)
            throw std::invalid_argument("forward: encoder outputs have width " + std::to_string(cross_context->cols()) +
                                        ", expected " + std::to_string(model.config.hidden));
        if (input.cross_masks.size() != input.batch)
            throw std::invalid_argument("forward: one cross-attention mask per sequence required");
    } else if (cross_context) {
        throw std::invalid_argument("forward: encoder outputs given to a decoder-only model");
    }
    auto h = detail::embed_rows(model.config, model.params, input.tokens, input.positions, input.types);
    return run_stack(model.config, model.params, model.decoder_prefix(), h, input.masks, cross_context,
                     std::span<const AttentionMask>(input.cross_masks));
}

/// Logits [batch * length, vocab].
template <typename T>
Tensor<T> forward(const TransformerModel<T>& model, const ModelInput& input, const Tensor<T>* cross_context = nullptr) {
    return output_logits(model, hidden_states(model, input, cross_context));
}

}  // namespace tlab
