#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "tlab/data/vocab.hpp"
#include "tlab/layout/incremental.hpp"
#include "tlab/layout/layout.hpp"
#include "tlab/layout/masks.hpp"

namespace tlab {

/// The full input seen at generation step t, after emitting `prefix`
/// (t tokens). The next-token distribution is read at `read_position`,
/// which is always the last position of `layout.sequence`:
///   Dec, AR, ED: slots [BOS, y_0 .. y_{t-1}], read at the last prefix slot
///   MLM, PF-free: slots [y_0 .. y_{t-1}, MASK]
///   FG-free, PFFG-free: tokens y_<t plus masks m_0 .. m_t (open tail)
struct InferenceInput {
    FrameworkLayout layout;
    std::vector<int> tokens;
    std::vector<int> encoder_tokens;
    FrameworkMask mask;
    std::size_t read_position = 0;
};

/// Self-attention mask of the step-t input for `framework`.
inline FrameworkMask inference_mask(const FrameworkLayout& layout, Framework framework, std::size_t t,
                                    std::size_t interval) {
    if (!uses_intervals(framework)) return build_framework_mask(layout, framework);
    FrameworkMask m;
    m.self = build_pf_interval_mask(layout, interval, interval_boundary(t, interval));
    return m;
}

inline InferenceInput inference_input(Framework framework, std::span<const int> source, std::span<const int> prefix,
                                      std::size_t interval) {
    if (source.empty()) throw std::invalid_argument("inference: empty source");
    const std::size_t S = source.size(), t = prefix.size();
    InferenceInput in;
    const bool stream = uses_mask_stream(framework);
    LayoutOptions options;
    options.open_tail = stream;
    in.layout = build_layout(framework, S, t + 1, options);
    const auto& seq = in.layout.sequence;
    if (is_encoder_decoder(framework)) {
        in.encoder_tokens.assign(source.begin(), source.end());
        in.tokens.push_back(special::kBos);
        in.tokens.insert(in.tokens.end(), prefix.begin(), prefix.end());
    } else {
        in.tokens.resize(seq.size());
        const bool shifted = traits(framework).objective == TrainingObjective::AutoRegressive;
        for (std::size_t p = 0; p < seq.size(); ++p) {
            const auto& r = seq[p];
            if (r.stream == Stream::Source)
                in.tokens[p] = source[r.slot];
            else if (r.stream == Stream::TargetMask)
                in.tokens[p] = special::kMask;
            else if (shifted)
                in.tokens[p] = r.slot == 0 ? special::kBos : prefix[r.slot - 1];
            else if (stream)
                in.tokens[p] = prefix[r.slot];
            else
                in.tokens[p] = r.slot < t ? prefix[r.slot] : special::kMask;
        }
    }
    in.mask = inference_mask(in.layout, framework, t, interval);
    in.read_position = seq.size() - 1;
    return in;
}

}  // namespace tlab
