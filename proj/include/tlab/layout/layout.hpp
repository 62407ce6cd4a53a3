#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/layout/framework.hpp"

namespace tlab {

inline constexpr std::size_t kMaxInputLength = 128;

enum class Stream : std::uint8_t { Source, TargetToken, TargetMask, Pad };

struct PositionRecord {
    Stream stream = Stream::Pad;
    std::size_t position_index = 0;  ///< row of the position-embedding table
    int type_id = 0;                 ///< 0 source, 1 target
    std::size_t slot = 0;            ///< source index or target index

    friend bool operator==(const PositionRecord&, const PositionRecord&) = default;
};

/// Physical order and embedding assignments of one input sequence.
struct SequenceLayout {
    std::vector<PositionRecord> positions;
    std::size_t source_len = 0;
    std::size_t target_len = 0;
    bool open_tail = false;  ///< mask-stream layouts: last target index has a mask but no token

    std::size_t size() const { return positions.size(); }
    const PositionRecord& operator[](std::size_t p) const { return positions[p]; }

    std::size_t unpadded_size() const {
        std::size_t n = 0;
        for (const auto& r : positions) n += r.stream != Stream::Pad;
        return n;
    }

    /// Physical position of target index `slot` in the given stream.
    std::optional<std::size_t> find(Stream stream, std::size_t slot) const {
        for (std::size_t p = 0; p < positions.size(); ++p)
            if (positions[p].stream == stream && positions[p].slot == slot) return p;
        return std::nullopt;
    }

    friend bool operator==(const SequenceLayout&, const SequenceLayout&) = default;
};

/// Layout of a framework's input. Encoder-decoder frameworks carry a
/// separate encoder sequence; `sequence` is then the decoder side.
struct FrameworkLayout {
    Framework framework = Framework::MLM;
    SequenceLayout sequence;
    std::optional<SequenceLayout> encoder;
};

struct LayoutOptions {
    std::optional<std::size_t> pad_to;          ///< pad `sequence` to this length
    std::optional<std::size_t> encoder_pad_to;  ///< ED only
    bool open_tail = false;                     ///< mask-stream frameworks only
};

namespace detail {

inline void check_length(std::size_t n) {
    if (n > kMaxInputLength)
        throw std::length_error("sequence of " + std::to_string(n) + " positions exceeds maximum input length " +
                                std::to_string(kMaxInputLength));
}

inline void pad_layout(SequenceLayout& layout, std::optional<std::size_t> pad_to) {
    if (!pad_to) return;
    if (*pad_to < layout.size())
        throw std::invalid_argument("pad_to " + std::to_string(*pad_to) + " shorter than layout of " +
                                    std::to_string(layout.size()));
    check_length(*pad_to);
    while (layout.size() < *pad_to) layout.positions.push_back({Stream::Pad, 0, 0, 0});
}

}  // namespace detail

/// Lays out `source_len` history tokens and `target_len` target slots.
///   decoder-only: [src..., tgt...], n = S + T
///   mask stream:  [src..., m0, y0, m1, y1, ...], n = S + 2T (S + 2T - 1 with open_tail)
///   ED:           encoder [src...] and decoder [tgt...]
inline FrameworkLayout build_layout(Framework framework, std::size_t source_len, std::size_t target_len,
                                    const LayoutOptions& options = {}) {
    if (source_len == 0) throw std::invalid_argument("build_layout: source length must be at least 1");
    if (target_len == 0) throw std::invalid_argument("build_layout: target length must be at least 1");
    if (options.open_tail && !uses_mask_stream(framework))
        throw std::invalid_argument("build_layout: open_tail applies to mask-stream frameworks only");

    FrameworkLayout out;
    out.framework = framework;
    auto& seq = out.sequence;
    seq.target_len = target_len;

    if (is_encoder_decoder(framework)) {
        detail::check_length(source_len);
        detail::check_length(target_len);
        SequenceLayout enc;
        enc.source_len = source_len;
        for (std::size_t j = 0; j < source_len; ++j) enc.positions.push_back({Stream::Source, j, 0, j});
        detail::pad_layout(enc, options.encoder_pad_to);
        for (std::size_t i = 0; i < target_len; ++i) seq.positions.push_back({Stream::TargetToken, i, 1, i});
        detail::pad_layout(seq, options.pad_to);
        out.encoder = std::move(enc);
        return out;
    }

    seq.source_len = source_len;
    const bool stream = uses_mask_stream(framework);
    const std::size_t n = stream ? source_len + 2 * target_len - (options.open_tail ? 1 : 0) : source_len + target_len;
    detail::check_length(n);
    seq.positions.reserve(n);
    for (std::size_t j = 0; j < source_len; ++j) seq.positions.push_back({Stream::Source, j, 0, j});
    for (std::size_t i = 0; i < target_len; ++i) {
        const std::size_t pos = source_len + i;
        if (stream) {
            seq.positions.push_back({Stream::TargetMask, pos, 1, i});
            if (!(options.open_tail && i + 1 == target_len)) seq.positions.push_back({Stream::TargetToken, pos, 1, i});
        } else {
            seq.positions.push_back({Stream::TargetToken, pos, 1, i});
        }
    }
    seq.open_tail = options.open_tail;
    detail::pad_layout(seq, options.pad_to);
    return out;
}

}  // namespace tlab
