#pragma once

// Incremental decoder state. Each hypothesis keeps, per layer, the residual
// stream entering the layer plus that layer's keys and values for every
// position of its step-t input. Advancing recomputes only the positions whose
// target index lies in incremental_update_range; all arithmetic goes through
// the same row kernels as the batched forward, so cached and full-recompute
// logits agree bit for bit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/decode/inference.hpp"
#include "tlab/layout/incremental.hpp"
#include "tlab/numcore/kernels.hpp"
#include "tlab/numcore/tensor.hpp"
#include "tlab/transformer/model.hpp"

namespace tlab {

/// Read-only view of one model plus the per-source encoder state (ED).
class IncrementalModel {
  public:
    IncrementalModel(const TransformerModel<float>& model, Framework framework, std::size_t interval)
        : model_(model), framework_(framework), interval_(interval) {
        if (model.encoder_decoder != is_encoder_decoder(framework))
            throw std::invalid_argument("model architecture does not match framework " +
                                        std::string(to_string(framework)));
        if (uses_intervals(framework) && interval == 0) throw std::invalid_argument("interval must be at least 1");
    }

    const TransformerModel<float>& model() const { return model_; }
    Framework framework() const { return framework_; }
    std::size_t interval() const { return interval_; }
    std::size_t hidden() const { return model_.config.hidden; }
    std::size_t layers() const { return model_.config.layers; }

    const float* w(const std::string& name) const { return model_.params.get(name).ptr(); }

    /// Encoder outputs and cross-attention keys/values per layer, computed
    /// once per source.
    struct EncoderState {
        std::vector<int> source;
        std::vector<float> outputs;                  ///< S x d
        std::vector<std::vector<float>> keys, values;  ///< per decoder layer, S x d
        AttentionMask mask;                          ///< encoder self-attention mask
    };

    std::shared_ptr<const EncoderState> encode_source(std::span<const int> source) const {
        auto st = std::make_shared<EncoderState>();
        st->source.assign(source.begin(), source.end());
        const auto layout = build_layout(framework_, source.size(), 1);
        const auto fm = build_framework_mask(layout, framework_);
        st->mask = *fm.encoder;
        Tensor<float> enc;
        {
            NoGradGuard guard;
            enc = encode(model_, ModelInput::single(*layout.encoder, source, *fm.encoder));
        }
        st->outputs.assign(enc.data().begin(), enc.data().end());
        const std::size_t S = source.size(), d = hidden();
        for (std::size_t l = 0; l < layers(); ++l) {
            const std::string p = "dec.layer" + std::to_string(l) + ".xattn.";
            std::vector<float> k(S * d), v(S * d);
            kernels::gemm(st->outputs.data(), w(p + "wk"), w(p + "bk"), k.data(), S, d, d);
            kernels::gemm(st->outputs.data(), w(p + "wv"), w(p + "bv"), v.data(), S, d, d);
            st->keys.push_back(std::move(k));
            st->values.push_back(std::move(v));
        }
        return st;
    }

  private:
    const TransformerModel<float>& model_;
    Framework framework_;
    std::size_t interval_;
};

/// Cached hidden states of one hypothesis at step t (t tokens emitted).
struct DecodeCache {
    std::size_t step = 0;
    std::vector<int> prefix;
    InferenceInput input;
    std::vector<std::vector<float>> hidden;  ///< per layer + final: residual stream, n x d
    std::vector<std::vector<float>> keys, values;  ///< per layer, n x d
    std::shared_ptr<const IncrementalModel::EncoderState> encoder;
    std::vector<std::size_t> last_updated;  ///< physical rows recomputed by the last advance

    std::size_t length() const { return input.layout.sequence.size(); }
};

namespace detail {

inline void recompute_rows(const IncrementalModel& im, DecodeCache& c, const std::vector<std::size_t>& rows) {
    const auto& model = im.model();
    const auto& cfg = model.config;
    const std::size_t d = cfg.hidden, n = c.length(), heads = cfg.heads, dk = cfg.head_dim(), f = cfg.ffn_hidden();
    const std::string prefix = model.decoder_prefix();
    const auto& seq = c.input.layout.sequence;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dk));

    c.hidden.resize(cfg.layers + 1);
    c.keys.resize(cfg.layers);
    c.values.resize(cfg.layers);
    for (auto& h : c.hidden) h.resize(n * d);
    for (auto& k : c.keys) k.resize(n * d);
    for (auto& v : c.values) v.resize(n * d);

    const float* tok = im.w("emb.token");
    const float* pos = im.w("emb.position");
    const float* typ = im.w("emb.type");
    for (auto r : rows) {
        const auto& rec = seq[r];
        const int id = c.input.tokens[r];
        if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size)
            throw std::out_of_range("unknown token id " + std::to_string(id));
        if (rec.position_index >= cfg.max_positions) throw std::out_of_range("position index exceeds max_positions");
        float* h = c.hidden[0].data() + r * d;
        for (std::size_t e = 0; e < d; ++e)
            h[e] = (tok[static_cast<std::size_t>(id) * d + e] + pos[rec.position_index * d + e]) +
                   typ[static_cast<std::size_t>(rec.type_id) * d + e];
    }

    std::vector<float> a(d), q(rows.size() * d), ctx(d), proj(d), ff(f), probs(std::max<std::size_t>(n, 1));
    std::vector<float> xprobs(c.encoder ? c.encoder->source.size() : 1);
    for (std::size_t l = 0; l < cfg.layers; ++l) {
        const std::string p = prefix + "layer" + std::to_string(l) + ".";
        const auto& hin = c.hidden[l];
        auto& hout = c.hidden[l + 1];
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::size_t r = rows[i];
            kernels::layer_norm_row(hin.data() + r * d, im.w(p + "ln1.gain"), im.w(p + "ln1.bias"), 1e-5f, a.data(), d);
            kernels::gemm(a.data(), im.w(p + "attn.wq"), im.w(p + "attn.bq"), q.data() + i * d, 1, d, d);
            kernels::gemm(a.data(), im.w(p + "attn.wk"), im.w(p + "attn.bk"), c.keys[l].data() + r * d, 1, d, d);
            kernels::gemm(a.data(), im.w(p + "attn.wv"), im.w(p + "attn.bv"), c.values[l].data() + r * d, 1, d, d);
        }
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const std::size_t r = rows[i];
            const auto allow = c.input.mask.self.row(r);
            for (std::size_t hh = 0; hh < heads; ++hh)
                kernels::attention_row(q.data() + i * d + hh * dk, c.keys[l].data() + hh * dk,
                                       c.values[l].data() + hh * dk, d, n, dk, allow.data(), scale, probs.data(),
                                       ctx.data() + hh * dk);
            kernels::gemm(ctx.data(), im.w(p + "attn.wo"), im.w(p + "attn.bo"), proj.data(), 1, d, d);
            float* x = hout.data() + r * d;
            const float* xin = hin.data() + r * d;
            for (std::size_t e = 0; e < d; ++e) x[e] = xin[e] + proj[e];
            if (c.encoder) {
                const auto& enc = *c.encoder;
                const std::size_t S = enc.source.size();
                std::vector<float> xq(d);
                kernels::layer_norm_row(x, im.w(p + "lnx.gain"), im.w(p + "lnx.bias"), 1e-5f, a.data(), d);
                kernels::gemm(a.data(), im.w(p + "xattn.wq"), im.w(p + "xattn.bq"), xq.data(), 1, d, d);
                const auto allow_x = c.input.mask.cross->row(r);
                for (std::size_t hh = 0; hh < heads; ++hh)
                    kernels::attention_row(xq.data() + hh * dk, enc.keys[l].data() + hh * dk,
                                           enc.values[l].data() + hh * dk, d, S, dk, allow_x.data(), scale,
                                           xprobs.data(), ctx.data() + hh * dk);
                kernels::gemm(ctx.data(), im.w(p + "xattn.wo"), im.w(p + "xattn.bo"), proj.data(), 1, d, d);
                for (std::size_t e = 0; e < d; ++e) x[e] = x[e] + proj[e];
            }
            kernels::layer_norm_row(x, im.w(p + "ln2.gain"), im.w(p + "ln2.bias"), 1e-5f, a.data(), d);
            kernels::gemm(a.data(), im.w(p + "ffn.w1"), im.w(p + "ffn.b1"), ff.data(), 1, d, f);
            for (auto& v : ff) v = kernels::gelu(v);
            kernels::gemm(ff.data(), im.w(p + "ffn.w2"), im.w(p + "ffn.b2"), proj.data(), 1, f, d);
            for (std::size_t e = 0; e < d; ++e) x[e] = x[e] + proj[e];
        }
    }
    c.last_updated = rows;
}

}  // namespace detail

/// Cache for step 0: every position of the step-0 input computed.
inline DecodeCache start_cache(const IncrementalModel& im, std::span<const int> source) {
    DecodeCache c;
    c.input = inference_input(im.framework(), source, {}, im.interval());
    if (is_encoder_decoder(im.framework())) c.encoder = im.encode_source(source);
    std::vector<std::size_t> rows(c.length());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    detail::recompute_rows(im, c, rows);
    return c;
}

/// Next-token log-probabilities at the cache's current step.
inline std::vector<float> cached_log_probs(const IncrementalModel& im, const DecodeCache& c) {
    const auto& model = im.model();
    const std::size_t d = model.config.hidden, v = model.config.vocab_size;
    const std::string prefix = model.decoder_prefix();
    std::vector<float> normed(d), logits(v), out(v);
    const float* h = c.hidden.back().data() + c.input.read_position * d;
    kernels::layer_norm_row(h, im.w(prefix + "ln_f.gain"), im.w(prefix + "ln_f.bias"), 1e-5f, normed.data(), d);
    if (model.config.tie_output_embedding) {
        const auto tt = kernels::transpose(im.w("emb.token"), v, d);
        kernels::gemm(normed.data(), tt.data(), static_cast<const float*>(nullptr), logits.data(), 1, d, v);
    } else {
        kernels::gemm(normed.data(), im.w("head.weight"), im.w("head.bias"), logits.data(), 1, d, v);
    }
    kernels::log_softmax_row(logits.data(), out.data(), v);
    return out;
}

/// Extends the cache with `token` emitted at step `t` (== cache.step),
/// recomputing exactly the positions whose target index is in
/// incremental_update_range(framework, t + 1).
inline DecodeCache advance_cache(const IncrementalModel& im, const DecodeCache& cache, int token, std::size_t t) {
    if (t != cache.step) throw std::invalid_argument("cache/prefix mismatch: cache at step " +
                                                     std::to_string(cache.step) + ", advancing step " +
                                                     std::to_string(t));
    DecodeCache c;
    c.step = t + 1;
    c.prefix = cache.prefix;
    c.prefix.push_back(token);
    c.encoder = cache.encoder;
    const auto source = is_encoder_decoder(im.framework())
                            ? std::span<const int>(cache.encoder->source)
                            : std::span<const int>(cache.input.tokens).first(cache.input.layout.sequence.source_len);
    c.input = inference_input(im.framework(), source, c.prefix, im.interval());
    const auto& old_seq = cache.input.layout.sequence;
    const auto& seq = c.input.layout.sequence;
    for (std::size_t p = 0; p < old_seq.size(); ++p)
        if (!(old_seq[p] == seq[p])) throw std::logic_error("cache/prefix mismatch: layout is not a prefix extension");

    const auto range = incremental_update_range(im.framework(), static_cast<long long>(c.step), im.interval());
    const std::set<std::size_t> update(range.begin(), range.end());
    std::vector<std::size_t> rows;
    for (std::size_t p = 0; p < seq.size(); ++p) {
        const bool target = seq[p].stream == Stream::TargetToken || seq[p].stream == Stream::TargetMask;
        if (target && update.count(seq[p].slot)) rows.push_back(p);
        else if (p >= old_seq.size()) throw std::logic_error("new position outside the update range");
    }
    const std::size_t d = im.hidden(), n = seq.size();
    c.hidden = cache.hidden;
    c.keys = cache.keys;
    c.values = cache.values;
    for (auto& h : c.hidden) h.resize(n * d);
    for (auto& k : c.keys) k.resize(n * d);
    for (auto& v : c.values) v.resize(n * d);
    detail::recompute_rows(im, c, rows);
    return c;
}

}  // namespace tlab
