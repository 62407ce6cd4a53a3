#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tlab {

enum class Framework { ED, Dec, MLM, AR, PFFree, FGFree, PFFGFree };

inline constexpr std::array<Framework, 7> kAllFrameworks = {
    Framework::ED, Framework::Dec, Framework::MLM, Framework::AR, Framework::PFFree, Framework::FGFree, Framework::PFFGFree};

enum class PretrainObjective { None, AR, MLM };

enum class Architecture { EncoderDecoder, DecoderOnly };
enum class SourceAttention { LeftToRight, Bidirectional };
enum class TargetAttentionKind { LeftToRight, IntervalBidirectional };
enum class TrainingObjective { AutoRegressive, MaskedLM, MaskStream };

/// One row of the framework taxonomy: what each framework inherits and how
/// it attends and trains.
struct FrameworkTraits {
    PretrainObjective lineage;
    Architecture architecture;
    SourceAttention source_attention;
    TargetAttentionKind target_attention;
    TrainingObjective objective;
};

inline constexpr FrameworkTraits traits(Framework f) {
    switch (f) {
        case Framework::ED:
            return {PretrainObjective::AR, Architecture::EncoderDecoder, SourceAttention::Bidirectional,
                    TargetAttentionKind::LeftToRight, TrainingObjective::AutoRegressive};
        case Framework::Dec:
            return {PretrainObjective::AR, Architecture::DecoderOnly, SourceAttention::LeftToRight,
                    TargetAttentionKind::LeftToRight, TrainingObjective::AutoRegressive};
        case Framework::MLM:
            return {PretrainObjective::MLM, Architecture::DecoderOnly, SourceAttention::Bidirectional,
                    TargetAttentionKind::LeftToRight, TrainingObjective::MaskedLM};
        case Framework::AR:
            return {PretrainObjective::MLM, Architecture::DecoderOnly, SourceAttention::Bidirectional,
                    TargetAttentionKind::LeftToRight, TrainingObjective::AutoRegressive};
        case Framework::PFFree:
            return {PretrainObjective::MLM, Architecture::DecoderOnly, SourceAttention::Bidirectional,
                    TargetAttentionKind::IntervalBidirectional, TrainingObjective::MaskedLM};
        case Framework::FGFree:
            return {PretrainObjective::MLM, Architecture::DecoderOnly, SourceAttention::Bidirectional,
                    TargetAttentionKind::LeftToRight, TrainingObjective::MaskStream};
        case Framework::PFFGFree:
            return {PretrainObjective::MLM, Architecture::DecoderOnly, SourceAttention::Bidirectional,
                    TargetAttentionKind::IntervalBidirectional, TrainingObjective::MaskStream};
    }
    throw std::logic_error("unknown framework");
}

/// Frameworks whose target side interleaves a [MASK] stream with the tokens.
inline constexpr bool uses_mask_stream(Framework f) { return traits(f).objective == TrainingObjective::MaskStream; }
inline constexpr bool uses_intervals(Framework f) {
    return traits(f).target_attention == TargetAttentionKind::IntervalBidirectional;
}
/// Frameworks that read the next-token distribution off an appended [MASK].
inline constexpr bool predicts_at_mask(Framework f) { return traits(f).objective != TrainingObjective::AutoRegressive; }
inline constexpr bool is_encoder_decoder(Framework f) {
    return traits(f).architecture == Architecture::EncoderDecoder;
}

inline std::string_view to_string(Framework f) {
    switch (f) {
        case Framework::ED: return "ed";
        case Framework::Dec: return "dec";
        case Framework::MLM: return "mlm";
        case Framework::AR: return "ar";
        case Framework::PFFree: return "pf-free";
        case Framework::FGFree: return "fg-free";
        case Framework::PFFGFree: return "pffg-free";
    }
    return "?";
}

inline Framework parse_framework(std::string_view s) {
    for (Framework f : kAllFrameworks)
        if (to_string(f) == s) return f;
    throw std::invalid_argument("unknown framework '" + std::string(s) +
                                "' (expected ed, dec, mlm, ar, pf-free, fg-free, pffg-free)");
}

inline std::string_view to_string(PretrainObjective o) {
    switch (o) {
        case PretrainObjective::None: return "none";
        case PretrainObjective::AR: return "ar";
        case PretrainObjective::MLM: return "mlm";
    }
    return "?";
}

inline PretrainObjective parse_objective(std::string_view s) {
    if (s == "none") return PretrainObjective::None;
    if (s == "ar") return PretrainObjective::AR;
    if (s == "mlm") return PretrainObjective::MLM;
    throw std::invalid_argument("unknown pretraining objective '" + std::string(s) + "' (expected ar, mlm, none)");
}

}  // namespace tlab
