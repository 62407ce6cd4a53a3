#pragma once

// Brute-force reference for attention masks, written directly from the
// framework descriptions as a pairwise "may position i read position j"
// predicate. It deliberately shares no logic with masks.hpp; tests compare
// the two.

#include <cstddef>

#include "tlab/layout/attention_mask.hpp"
#include "tlab/layout/framework.hpp"
#include "tlab/layout/layout.hpp"

namespace tlab::oracle {

namespace detail {

// Moment at which a position's content becomes final during generation.
// History is there from the start; a generated token exists after its step;
// tokens inside a re-encoded prefix block all settle at the block's end.
inline double ready_time(const PositionRecord& r, std::size_t boundary) {
    switch (r.stream) {
        case Stream::Source: return -1.0;
        case Stream::TargetToken:
            return r.slot < boundary ? static_cast<double>(boundary) - 1.0 : static_cast<double>(r.slot);
        case Stream::TargetMask: return static_cast<double>(r.slot);
        case Stream::Pad: return 1e18;
    }
    return 1e18;
}

inline bool may_read(Framework f, const SequenceLayout& layout, std::size_t i, std::size_t j, std::size_t boundary) {
    const auto& reader = layout[i];
    const auto& read = layout[j];
    if (reader.stream == Stream::Pad || read.stream == Stream::Pad) return i == j;
    if (f == Framework::Dec) return j <= i;  // one left-to-right stream over history and response
    if (reader.stream == Stream::Source) return read.stream == Stream::Source;
    if (read.stream == Stream::TargetMask) return i == j;  // a [MASK] copy is private to its own prediction
    // the placeholder predicting index s reads exactly the tokens final before step s
    if (reader.stream == Stream::TargetMask)
        return read.stream == Stream::Source || ready_time(read, boundary) < ready_time(reader, boundary);
    // a target reader sees whatever was final no later than itself
    return ready_time(read, boundary) <= ready_time(reader, boundary);
}

}  // namespace detail

inline FrameworkMask mask_rule_oracle(Framework framework, const FrameworkLayout& layout, std::size_t boundary = 0) {
    FrameworkMask out;
    if (framework == Framework::ED) {
        const auto& enc = *layout.encoder;
        const auto& dec = layout.sequence;
        AttentionMask e = AttentionMask::square(enc.size());
        for (std::size_t i = 0; i < enc.size(); ++i)
            for (std::size_t j = 0; j < enc.size(); ++j) {
                const bool pad_i = enc[i].stream == Stream::Pad, pad_j = enc[j].stream == Stream::Pad;
                e.set(i, j, (pad_i || pad_j) ? i == j : true);
            }
        AttentionMask d = AttentionMask::square(dec.size());
        for (std::size_t i = 0; i < dec.size(); ++i)
            for (std::size_t j = 0; j < dec.size(); ++j) {
                const bool pad_i = dec[i].stream == Stream::Pad, pad_j = dec[j].stream == Stream::Pad;
                d.set(i, j, (pad_i || pad_j) ? i == j : j <= i);
            }
        AttentionMask c(dec.size(), enc.size());
        for (std::size_t i = 0; i < dec.size(); ++i)
            for (std::size_t j = 0; j < enc.size(); ++j) {
                if (enc[j].stream == Stream::Pad) continue;
                c.set(i, j, dec[i].stream != Stream::Pad || j == 0);
            }
        out.self = d;
        out.encoder = e;
        out.cross = c;
        return out;
    }
    const auto& seq = layout.sequence;
    AttentionMask m = AttentionMask::square(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i)
        for (std::size_t j = 0; j < seq.size(); ++j) m.set(i, j, detail::may_read(framework, seq, i, j, boundary));
    out.self = m;
    return out;
}

}  // namespace tlab::oracle
