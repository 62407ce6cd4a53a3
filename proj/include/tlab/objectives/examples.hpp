#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/data/vocab.hpp"
#include "tlab/layout/layout.hpp"
#include "tlab/layout/masks.hpp"
#include "tlab/numcore/rng.hpp"
#include "tlab/objectives/corruption.hpp"
#include "tlab/objectives/example.hpp"

namespace tlab {

struct ExampleOptions {
    double mask_rate = 0.4;    ///< target corruption rate (MLM, PF-free)
    std::size_t interval = 5;  ///< bidirectional interval (PF-free, PFFG-free)
    double stream_rate = 1.0;  ///< fraction of mask-stream slots that carry loss
};

namespace detail {

inline std::vector<int> with_eos(const std::vector<int>& y) {
    auto out = y;
    out.push_back(special::kEos);
    return out;
}

inline void check_inputs(const std::vector<int>& x, const std::vector<int>& y) {
    if (x.empty()) throw std::invalid_argument("training example: empty source");
    if (y.empty()) throw std::invalid_argument("training example: empty target");
}

}  // namespace detail

/// Shifted teacher forcing: input x ++ [BOS] ++ y, and the target slot
/// holding [BOS] or y_{i-1} predicts y_i (the last one predicts [EOS]).
/// Covers Dec, AR and (with a separate encoder) ED.
inline TrainingExample ar_example(Framework framework, const std::vector<int>& x, const std::vector<int>& y) {
    detail::check_inputs(x, y);
    if (uses_mask_stream(framework) || traits(framework).objective != TrainingObjective::AutoRegressive)
        throw std::invalid_argument("ar_example: framework " + std::string(to_string(framework)) +
                                    " is not auto-regressive");
    const std::size_t S = x.size(), T = y.size() + 1;
    TrainingExample ex;
    ex.layout = build_layout(framework, S, T);
    const auto gold = detail::with_eos(y);
    std::vector<int> target{special::kBos};
    target.insert(target.end(), y.begin(), y.end());
    const std::size_t offset = is_encoder_decoder(framework) ? 0 : S;
    if (is_encoder_decoder(framework)) {
        ex.encoder_tokens = x;
        ex.tokens = target;
    } else {
        ex.tokens = x;
        ex.tokens.insert(ex.tokens.end(), target.begin(), target.end());
    }
    for (std::size_t i = 0; i < T; ++i) {
        ex.loss_positions.push_back(offset + i);
        ex.gold.push_back(gold[i]);
    }
    ex.mask = build_framework_mask(ex.layout, framework);
    return ex;
}

/// MLM fine-tuning: target slots y ++ [EOS], a random subset replaced by
/// [MASK] and predicted. With `boundary` > 0 (PF-free) slots below the
/// boundary stay intact, carry no loss and attend bidirectionally.
inline TrainingExample mlm_example(Framework framework, const std::vector<int>& x, const std::vector<int>& y,
                                   const ExampleOptions& opts, Rng& rng) {
    detail::check_inputs(x, y);
    if (framework != Framework::MLM && framework != Framework::PFFree)
        throw std::invalid_argument("mlm_example: framework " + std::string(to_string(framework)) +
                                    " does not use target corruption");
    const std::size_t S = x.size();
    const auto slots = detail::with_eos(y);
    const std::size_t T = slots.size();
    TrainingExample ex;
    ex.layout = build_layout(framework, S, T);
    MaskedSet masked;
    std::size_t boundary = 0;
    if (framework == Framework::PFFree) {
        auto p = pf_sample_pattern(T, opts.interval, opts.mask_rate, rng);
        boundary = p.boundary;
        masked = std::move(p.masked);
    } else {
        masked = mlm_corrupt_target(slots, opts.mask_rate, rng).second;
    }
    ex.tokens = x;
    for (std::size_t i = 0; i < T; ++i) ex.tokens.push_back(masked.count(i) ? special::kMask : slots[i]);
    for (auto i : masked) {
        ex.loss_positions.push_back(S + i);
        ex.gold.push_back(slots[i]);
    }
    if (framework == Framework::PFFree)
        ex.mask.self = build_pf_interval_mask(ex.layout, opts.interval, boundary);
    else
        ex.mask = build_framework_mask(ex.layout, framework);
    return ex;
}

/// Mask-stream example: tokens y ++ [EOS] stay intact and each target slot
/// gets a [MASK] copy sharing its position; the copy at slot i predicts
/// slot i. The final slot has a mask but no token. For PFFG-free a
/// boundary is drawn as in PF-free and only slots at or past it carry loss.
inline TrainingExample fg_example(Framework framework, const std::vector<int>& x, const std::vector<int>& y,
                                  const ExampleOptions& opts, Rng& rng) {
    detail::check_inputs(x, y);
    if (!uses_mask_stream(framework))
        throw std::invalid_argument("fg_example: framework " + std::string(to_string(framework)) +
                                    " has no mask stream");
    const std::size_t S = x.size();
    const auto slots = detail::with_eos(y);
    const std::size_t T = slots.size();
    TrainingExample ex;
    LayoutOptions tail;
    tail.open_tail = true;
    ex.layout = build_layout(framework, S, T, tail);
    const auto& seq = ex.layout.sequence;
    std::size_t boundary = 0;
    if (uses_intervals(framework)) boundary = uniform_index(rng, (T - 1) / opts.interval + 1) * opts.interval;
    MaskedSet supervised;
    if (opts.stream_rate >= 1.0) {
        for (std::size_t i = boundary; i < T; ++i) supervised.insert(i);
    } else {
        supervised = sample_masked(boundary, T, opts.stream_rate, rng);
    }
    ex.tokens.resize(seq.size());
    for (std::size_t p = 0; p < seq.size(); ++p) {
        const auto& r = seq[p];
        if (r.stream == Stream::Source)
            ex.tokens[p] = x[r.slot];
        else if (r.stream == Stream::TargetToken)
            ex.tokens[p] = slots[r.slot];
        else
            ex.tokens[p] = special::kMask;
        if (r.stream == Stream::TargetMask && supervised.count(r.slot)) {
            ex.loss_positions.push_back(p);
            ex.gold.push_back(slots[r.slot]);
        }
    }
    if (uses_intervals(framework))
        ex.mask.self = build_pf_interval_mask(ex.layout, opts.interval, boundary);
    else
        ex.mask = build_framework_mask(ex.layout, framework);
    return ex;
}

/// The fine-tuning example of `framework` for source `x` and response `y`.
inline TrainingExample make_example(Framework framework, const std::vector<int>& x, const std::vector<int>& y,
                                    const ExampleOptions& opts, Rng& rng) {
    switch (traits(framework).objective) {
        case TrainingObjective::AutoRegressive: return ar_example(framework, x, y);
        case TrainingObjective::MaskedLM: return mlm_example(framework, x, y, opts, rng);
        case TrainingObjective::MaskStream: return fg_example(framework, x, y, opts, rng);
    }
    throw std::logic_error("unknown objective");
}

namespace detail {

inline SequenceLayout flat_layout(std::size_t n, std::size_t first_len) {
    SequenceLayout s;
    for (std::size_t p = 0; p < n; ++p) {
        const bool first = p < first_len;
        s.positions.push_back({first ? Stream::Source : Stream::TargetToken, p, first ? 0 : 1, first ? p : p - first_len});
    }
    s.source_len = first_len;
    s.target_len = n - first_len;
    return s;
}

}  // namespace detail

/// Left-to-right language-model pretraining: input [BOS] ++ text, every
/// position predicts the next token (the last predicts [EOS]); causal mask,
/// type 0 throughout.
inline TrainingExample pretrain_ar_example(const std::vector<int>& text) {
    if (text.empty()) throw std::invalid_argument("pretraining example: empty text");
    const std::size_t n = text.size() + 1;
    if (n > kMaxInputLength) throw std::length_error("pretraining text exceeds maximum input length");
    TrainingExample ex;
    ex.layout.framework = Framework::Dec;
    ex.layout.sequence = detail::flat_layout(n, n);
    ex.tokens.push_back(special::kBos);
    ex.tokens.insert(ex.tokens.end(), text.begin(), text.end());
    for (std::size_t p = 0; p < n; ++p) {
        ex.loss_positions.push_back(p);
        ex.gold.push_back(p + 1 < n ? text[p] : special::kEos);
    }
    ex.mask.self = detail::causal_mask(ex.layout.sequence);
    return ex;
}

/// Masked-LM pretraining over two segments (types 0 and 1) joined by
/// [SEP]: 15% of the words selected, replaced 80/10/10, full bidirectional
/// attention.
inline TrainingExample pretrain_mlm_example(const std::vector<int>& first, const std::vector<int>& second,
                                            std::size_t vocab_size, Rng& rng, double rate = 0.15) {
    if (first.empty() || second.empty()) throw std::invalid_argument("pretraining example: empty segment");
    const std::size_t n = first.size() + 1 + second.size();
    if (n > kMaxInputLength) throw std::length_error("pretraining text exceeds maximum input length");
    TrainingExample ex;
    ex.layout.framework = Framework::MLM;
    ex.layout.sequence = detail::flat_layout(n, first.size() + 1);
    ex.tokens = first;
    ex.tokens.push_back(special::kSep);
    ex.tokens.insert(ex.tokens.end(), second.begin(), second.end());
    const auto original = ex.tokens;
    std::vector<std::size_t> eligible;
    for (std::size_t p = 0; p < n; ++p)
        if (!Vocab::is_special(original[p])) eligible.push_back(p);
    for (auto p : bert_corrupt(ex.tokens, eligible, rate, vocab_size, rng)) {
        ex.loss_positions.push_back(p);
        ex.gold.push_back(original[p]);
    }
    ex.mask.self = AttentionMask::square(n, true);
    return ex;
}

}  // namespace tlab
