#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

#include "tlab/layout/attention_mask.hpp"
#include "tlab/layout/framework.hpp"
#include "tlab/layout/layout.hpp"

namespace tlab {

namespace detail {

// Rows and columns of padding are isolated: a pad row sees only itself.
inline void isolate_padding(const SequenceLayout& layout, AttentionMask& mask) {
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const bool pad_row = layout[i].stream == Stream::Pad;
        for (std::size_t j = 0; j < layout.size(); ++j) {
            const bool pad_col = layout[j].stream == Stream::Pad;
            if (pad_row)
                mask.set(i, j, i == j);
            else if (pad_col)
                mask.set(i, j, false);
        }
    }
}

inline AttentionMask causal_mask(const SequenceLayout& layout) {
    auto mask = AttentionMask::square(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i)
        for (std::size_t j = 0; j <= i; ++j) mask.set(i, j, true);
    isolate_padding(layout, mask);
    return mask;
}

/// Source bidirectional; target token rows see source plus target tokens
/// with index <= i, or the whole block [0, boundary) when i < boundary;
/// mask-stream rows see source, tokens with index < i, and themselves.
/// A mask-stream row below the boundary sees no target tokens: the block
/// has re-read y_i, so reading it would leak the prediction through a
/// second layer.
inline AttentionMask source_target_mask(const SequenceLayout& layout, std::size_t boundary) {
    const std::size_t n = layout.size();
    auto mask = AttentionMask::square(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& row = layout[i];
        for (std::size_t j = 0; j < n; ++j) {
            const auto& col = layout[j];
            bool allow = false;
            if (col.stream == Stream::Source) {
                allow = row.stream != Stream::Pad;
            } else if (col.stream == Stream::TargetToken) {
                if (row.stream == Stream::TargetToken)
                    allow = row.slot < boundary ? col.slot < boundary : col.slot <= row.slot;
                else if (row.stream == Stream::TargetMask)
                    allow = row.slot >= boundary && col.slot < row.slot;
            } else if (col.stream == Stream::TargetMask) {
                allow = i == j;
            }
            mask.set(i, j, allow);
        }
    }
    isolate_padding(layout, mask);
    return mask;
}

inline void check_family(const FrameworkLayout& layout, Framework framework) {
    const bool ok = is_encoder_decoder(layout.framework) == is_encoder_decoder(framework) &&
                    uses_mask_stream(layout.framework) == uses_mask_stream(framework) &&
                    layout.encoder.has_value() == is_encoder_decoder(framework);
    if (!ok)
        throw std::invalid_argument("framework/layout mismatch: layout built for " +
                                    std::string(to_string(layout.framework)) + ", mask requested for " +
                                    std::string(to_string(framework)));
}

}  // namespace detail

inline FrameworkMask build_framework_mask(const FrameworkLayout& layout, Framework framework) {
    detail::check_family(layout, framework);
    FrameworkMask out;
    switch (framework) {
        case Framework::Dec:
            out.self = detail::causal_mask(layout.sequence);
            break;
        case Framework::ED: {
            const auto& enc = *layout.encoder;
            const auto& dec = layout.sequence;
            out.self = detail::causal_mask(dec);
            AttentionMask encoder = AttentionMask::square(enc.size(), true);
            detail::isolate_padding(enc, encoder);
            AttentionMask cross(dec.size(), enc.size());
            for (std::size_t i = 0; i < dec.size(); ++i)
                for (std::size_t j = 0; j < enc.size(); ++j)
                    cross.set(i, j, enc[j].stream != Stream::Pad && (dec[i].stream != Stream::Pad || j == 0));
            out.encoder = std::move(encoder);
            out.cross = std::move(cross);
            break;
        }
        default:
            out.self = detail::source_target_mask(layout.sequence, 0);
            break;
    }
    return out;
}

/// Interval-bidirectional target mask: target indices below `boundary`
/// attend to each other both ways, the rest left-to-right. `boundary` 0
/// gives the plain source-bidirectional/target-causal mask.
inline AttentionMask build_pf_interval_mask(const FrameworkLayout& layout, std::size_t interval, std::size_t boundary) {
    if (!uses_intervals(layout.framework))
        throw std::invalid_argument("interval mask requested for non-interval framework " +
                                    std::string(to_string(layout.framework)));
    if (interval == 0) throw std::invalid_argument("interval must be at least 1");
    if (boundary % interval != 0 || boundary > layout.sequence.target_len)
        throw std::invalid_argument("boundary " + std::to_string(boundary) + " must be a multiple of interval " +
                                    std::to_string(interval) + " not exceeding target length " +
                                    std::to_string(layout.sequence.target_len));
    return detail::source_target_mask(layout.sequence, boundary);
}

}  // namespace tlab
