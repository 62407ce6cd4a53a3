#include <gtest/gtest.h>

#include "support/conflict_oracle.hpp"
#include "tlab/layout/mask_oracle.hpp"
#include "support/helpers.hpp"

using namespace tlab;

namespace {

std::set<std::size_t> allowed_cols(const AttentionMask& m, std::size_t row) {
    std::set<std::size_t> out;
    for (std::size_t j = 0; j < m.cols(); ++j)
        if (m.allowed(row, j)) out.insert(j);
    return out;
}

FrameworkLayout layout_for(Framework f, std::size_t S, std::size_t T, bool open_tail = false) {
    LayoutOptions o;
    o.open_tail = open_tail && uses_mask_stream(f);
    return build_layout(f, S, T, o);
}

}  // namespace

TEST(Framework, TraitsFollowLineage) {
    EXPECT_EQ(traits(Framework::ED).lineage, PretrainObjective::AR);
    EXPECT_EQ(traits(Framework::Dec).lineage, PretrainObjective::AR);
    for (Framework f : {Framework::MLM, Framework::AR, Framework::PFFree, Framework::FGFree, Framework::PFFGFree})
        EXPECT_EQ(traits(f).lineage, PretrainObjective::MLM);
    EXPECT_EQ(traits(Framework::Dec).source_attention, SourceAttention::LeftToRight);
    EXPECT_EQ(traits(Framework::AR).objective, TrainingObjective::AutoRegressive);
    EXPECT_TRUE(uses_intervals(Framework::PFFGFree));
    EXPECT_TRUE(uses_mask_stream(Framework::PFFGFree));
    for (Framework f : kAllFrameworks) EXPECT_EQ(parse_framework(to_string(f)), f);
    EXPECT_THROW(parse_framework("gpt"), std::invalid_argument);
}

TEST(BuildLayout, MlmThreeTwo) {
    auto l = build_layout(Framework::MLM, 3, 2);
    ASSERT_EQ(l.sequence.size(), 5u);
    const int types[5] = {0, 0, 0, 1, 1};
    for (std::size_t p = 0; p < 5; ++p) {
        EXPECT_EQ(l.sequence[p].type_id, types[p]);
        EXPECT_EQ(l.sequence[p].position_index, p);
    }
    EXPECT_FALSE(l.encoder.has_value());
}

TEST(BuildLayout, FgFreeInterleavesSharedPositions) {
    auto l = build_layout(Framework::FGFree, 2, 2);
    ASSERT_EQ(l.sequence.size(), 6u);
    const Stream streams[6] = {Stream::Source, Stream::Source, Stream::TargetMask,
                               Stream::TargetToken, Stream::TargetMask, Stream::TargetToken};
    const std::size_t pos[6] = {0, 1, 2, 2, 3, 3};
    const int types[6] = {0, 0, 1, 1, 1, 1};
    for (std::size_t p = 0; p < 6; ++p) {
        EXPECT_EQ(l.sequence[p].stream, streams[p]);
        EXPECT_EQ(l.sequence[p].position_index, pos[p]);
        EXPECT_EQ(l.sequence[p].type_id, types[p]);
    }
}

TEST(BuildLayout, EncoderDecoderSplits) {
    auto l = build_layout(Framework::ED, 3, 2);
    ASSERT_TRUE(l.encoder.has_value());
    EXPECT_EQ(l.encoder->size(), 3u);
    EXPECT_EQ(l.sequence.size(), 2u);
}

TEST(BuildLayout, LengthLimit) {
    EXPECT_NO_THROW(build_layout(Framework::MLM, 64, 64));
    try {
        build_layout(Framework::MLM, 64, 65);
        FAIL();
    } catch (const std::length_error& e) {
        EXPECT_NE(std::string(e.what()).find("exceeds maximum input length"), std::string::npos);
    }
    EXPECT_THROW(build_layout(Framework::FGFree, 20, 55), std::length_error);
    EXPECT_THROW(build_layout(Framework::MLM, 0, 2), std::invalid_argument);
    EXPECT_THROW(build_layout(Framework::MLM, 2, 0), std::invalid_argument);
}

TEST(BuildLayout, PaddingAppendsPadRecords) {
    LayoutOptions o;
    o.pad_to = 8;
    auto l = build_layout(Framework::Dec, 2, 3, o);
    ASSERT_EQ(l.sequence.size(), 8u);
    EXPECT_EQ(l.sequence.unpadded_size(), 5u);
    EXPECT_EQ(l.sequence[7].stream, Stream::Pad);
}

TEST(FrameworkMaskTest, MlmThreeTwo) {
    auto l = build_layout(Framework::MLM, 3, 2);
    auto m = build_framework_mask(l, Framework::MLM).self;
    EXPECT_EQ(allowed_cols(m, 3), (std::set<std::size_t>{0, 1, 2, 3}));
    EXPECT_EQ(allowed_cols(m, 4), (std::set<std::size_t>{0, 1, 2, 3, 4}));
    for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(allowed_cols(m, r), (std::set<std::size_t>{0, 1, 2}));
}

TEST(FrameworkMaskTest, DecIsLowerTriangular) {
    auto m = build_framework_mask(build_layout(Framework::Dec, 2, 2), Framework::Dec).self;
    EXPECT_EQ(m.to_text(), "1000\n1100\n1110\n1111\n");
}

TEST(FrameworkMaskTest, FgFreeMaskStreamPrivacy) {
    auto l = build_layout(Framework::FGFree, 2, 2);
    auto m = build_framework_mask(l, Framework::FGFree).self;
    // positions: src0 src1 m0 y0 m1 y1
    EXPECT_EQ(allowed_cols(m, 4), (std::set<std::size_t>{0, 1, 3, 4}));
    for (std::size_t r = 0; r < 6; ++r) EXPECT_EQ(m.allowed(r, 2), r == 2) << r;
}

TEST(FrameworkMaskTest, EncoderDecoderMasks) {
    auto l = build_layout(Framework::ED, 3, 4);
    auto m = build_framework_mask(l, Framework::ED);
    ASSERT_TRUE(m.encoder && m.cross);
    EXPECT_EQ(*m.encoder, AttentionMask::square(3, true));
    EXPECT_EQ(*m.cross, AttentionMask(4, 3, true));
    EXPECT_EQ(m.self.to_text(), "1000\n1100\n1110\n1111\n");
}

TEST(FrameworkMaskTest, MismatchThrows) {
    EXPECT_THROW(build_framework_mask(build_layout(Framework::MLM, 2, 2), Framework::FGFree), std::invalid_argument);
    EXPECT_THROW(build_framework_mask(build_layout(Framework::MLM, 2, 2), Framework::ED), std::invalid_argument);
}

TEST(PfIntervalMask, FigureBoundaryThree) {
    auto l = build_layout(Framework::PFFree, 2, 5);
    auto m = build_pf_interval_mask(l, 3, 3);
    EXPECT_EQ(allowed_cols(m, 2 + 1), (std::set<std::size_t>{0, 1, 2, 3, 4}));
    EXPECT_EQ(allowed_cols(m, 2 + 4), (std::set<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
}

TEST(PfIntervalMask, ZeroBoundaryEqualsMlm) {
    auto l = build_layout(Framework::PFFree, 2, 5);
    auto mlm = build_framework_mask(build_layout(Framework::MLM, 2, 5), Framework::MLM).self;
    EXPECT_EQ(build_pf_interval_mask(l, 3, 0), mlm);
}

TEST(PfIntervalMask, DefaultIntervalLastRow) {
    auto l = build_layout(Framework::PFFree, 1, 7);
    auto m = build_pf_interval_mask(l, 5, 5);
    EXPECT_EQ(allowed_cols(m, 1 + 6), (std::set<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7}));
    EXPECT_EQ(allowed_cols(m, 1 + 0), (std::set<std::size_t>{0, 1, 2, 3, 4, 5}));
}

TEST(PfIntervalMask, InvalidBoundaries) {
    auto l = build_layout(Framework::PFFree, 2, 5);
    EXPECT_THROW(build_pf_interval_mask(l, 3, 2), std::invalid_argument);
    EXPECT_THROW(build_pf_interval_mask(l, 3, 6), std::invalid_argument);
    EXPECT_THROW(build_pf_interval_mask(l, 0, 0), std::invalid_argument);
    EXPECT_THROW(build_pf_interval_mask(build_layout(Framework::MLM, 2, 5), 3, 3), std::invalid_argument);
}

TEST(MaskOracle, SmallCases) {
    auto dec = oracle::mask_rule_oracle(Framework::Dec, build_layout(Framework::Dec, 1, 1)).self;
    EXPECT_EQ(dec.to_text(), "10\n11\n");
    auto mlm = oracle::mask_rule_oracle(Framework::MLM, build_layout(Framework::MLM, 1, 1)).self;
    EXPECT_EQ(mlm.to_text(), "10\n11\n");
}

TEST(MaskOracle, AgreesWithBuilderEverywhere) {
    for (Framework f : kAllFrameworks)
        for (std::size_t S = 1; S <= 8; ++S)
            for (std::size_t T = 1; T <= 8; ++T)
                for (bool tail : {false, true}) {
                    if (tail && !uses_mask_stream(f)) continue;
                    const auto l = layout_for(f, S, T, tail);
                    ASSERT_EQ(build_framework_mask(l, f), oracle::mask_rule_oracle(f, l))
                        << to_string(f) << " S=" << S << " T=" << T;
                    if (!uses_intervals(f)) continue;
                    for (std::size_t k : {1u, 3u, 5u})
                        for (std::size_t b = 0; b <= T; b += k)
                            ASSERT_EQ(build_pf_interval_mask(l, k, b), oracle::mask_rule_oracle(f, l, b).self)
                                << to_string(f) << " S=" << S << " T=" << T << " k=" << k << " b=" << b;
                }
}

TEST(MaskInvariants, EveryRowNonEmptyAndDiagonal) {
    for (Framework f : kAllFrameworks)
        for (std::size_t S = 1; S <= 8; ++S)
            for (std::size_t T = 1; T <= 8; ++T) {
                const auto l = build_layout(f, S, T);
                const auto m = build_framework_mask(l, f);
                for (std::size_t i = 0; i < m.self.rows(); ++i) {
                    EXPECT_GE(m.self.row_count(i), 1u);
                    EXPECT_TRUE(m.self.allowed(i, i));
                }
                if (m.encoder) {
                    for (std::size_t i = 0; i < m.encoder->rows(); ++i) EXPECT_TRUE(m.encoder->allowed(i, i));
                }
            }
}

TEST(MaskInvariants, MaskStreamColumnsInvisible) {
    for (Framework f : {Framework::FGFree, Framework::PFFGFree})
        for (std::size_t S = 1; S <= 6; ++S)
            for (std::size_t T = 1; T <= 6; ++T) {
                const auto l = build_layout(f, S, T);
                const auto& seq = l.sequence;
                for (std::size_t b = 0; b <= T; b += (uses_intervals(f) ? 2 : T + 1)) {
                    const auto m = uses_intervals(f) ? build_pf_interval_mask(l, 2, b) : build_framework_mask(l, f).self;
                    for (std::size_t j = 0; j < seq.size(); ++j) {
                        if (seq[j].stream != Stream::TargetMask) continue;
                        for (std::size_t i = 0; i < seq.size(); ++i) {
                            if (i != j) {
                                EXPECT_FALSE(m.allowed(i, j));
                            }
                        }
                    }
                }
            }
}

// Reads compose across layers, so a mask keeps a row independent of its
// forbidden columns only if it is closed under composition.
TEST(MaskInvariants, TransitivelyClosed) {
    for (Framework f : kAllFrameworks)
        for (std::size_t S = 1; S <= 5; ++S)
            for (std::size_t T = 1; T <= 7; ++T) {
                LayoutOptions o;
                o.open_tail = uses_mask_stream(f);
                const auto l = build_layout(f, S, T, o);
                std::vector<AttentionMask> masks{build_framework_mask(l, f).self};
                if (uses_intervals(f))
                    for (std::size_t k : {1u, 2u, 3u})
                        for (std::size_t b = 0; b <= T; b += k) masks.push_back(build_pf_interval_mask(l, k, b));
                for (const auto& m : masks)
                    for (std::size_t i = 0; i < m.rows(); ++i)
                        for (std::size_t q = 0; q < m.rows(); ++q) {
                            if (!m.allowed(i, q)) continue;
                            for (std::size_t j = 0; j < m.rows(); ++j)
                                if (m.allowed(q, j)) {
                                    ASSERT_TRUE(m.allowed(i, j))
                                        << to_string(f) << " S=" << S << " T=" << T << " " << i << "->" << q << "->" << j;
                                }
                        }
            }
}

TEST(MaskInvariants, FutureTargetsOnlyInsideBidirectionalBlock) {
    for (Framework f : kAllFrameworks) {
        if (is_encoder_decoder(f)) continue;
        for (std::size_t T = 1; T <= 8; ++T) {
            const auto l = build_layout(f, 2, T);
            const auto& seq = l.sequence;
            std::vector<std::pair<std::size_t, AttentionMask>> masks{{0, build_framework_mask(l, f).self}};
            if (uses_intervals(f))
                for (std::size_t b = 3; b <= T; b += 3) masks.emplace_back(b, build_pf_interval_mask(l, 3, b));
            for (const auto& [b, m] : masks)
                for (std::size_t i = 0; i < seq.size(); ++i)
                    for (std::size_t j = 0; j < seq.size(); ++j) {
                        if (seq[i].stream == Stream::Source || seq[j].stream == Stream::Source) continue;
                        if (!m.allowed(i, j) || seq[j].slot <= seq[i].slot) continue;
                        EXPECT_TRUE(seq[i].slot < b && seq[j].slot < b)
                            << to_string(f) << " T=" << T << " b=" << b << " i=" << i << " j=" << j;
                    }
        }
    }
}

TEST(Conflicts, FigureExample) {
    auto c = detect_mask_conflict({1, 3}, 4);
    ASSERT_EQ(c.size(), 1u);
    EXPECT_EQ(c[0], (std::pair<std::size_t, std::size_t>{1, 3}));
    EXPECT_TRUE(detect_mask_conflict({2}, 4).empty());
    EXPECT_TRUE(detect_mask_conflict({}, 4).empty());
    EXPECT_TRUE(detect_mask_conflict({0, 2}, 4, TargetPrediction::LeftToRight).empty());
    EXPECT_THROW(detect_mask_conflict({4}, 4), std::invalid_argument);
}

TEST(Conflicts, MatchesSatisfiabilityOracle) {
    for (std::size_t T = 1; T <= 6; ++T)
        for (std::uint32_t bits = 0; bits < (1u << T); ++bits) {
            std::set<std::size_t> masked;
            for (std::size_t i = 0; i < T; ++i)
                if ((bits >> i) & 1u) masked.insert(i);
            const auto got = detect_mask_conflict(masked, T);
            EXPECT_EQ(got, test_support::conflict_oracle(masked, T)) << "T=" << T << " bits=" << bits;
            EXPECT_EQ(got.empty(), masked.size() <= 1);
        }
}

TEST(IncrementalRange, SpecCases) {
    EXPECT_EQ(incremental_update_range(Framework::PFFree, 2, 3), (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(incremental_update_range(Framework::PFFree, 3, 3), (std::vector<std::size_t>{0, 1, 2, 3}));
    EXPECT_EQ(incremental_update_range(Framework::Dec, 0, 5), (std::vector<std::size_t>{0}));
    EXPECT_EQ(incremental_update_range(Framework::PFFree, 0, 3), (std::vector<std::size_t>{0}));
    EXPECT_EQ(incremental_update_range(Framework::ED, 4, 5), (std::vector<std::size_t>{4}));
    EXPECT_EQ(incremental_update_range(Framework::FGFree, 5, 5), (std::vector<std::size_t>{4, 5}));
    EXPECT_EQ(incremental_update_range(Framework::PFFGFree, 5, 5).size(), 6u);
    EXPECT_THROW(incremental_update_range(Framework::Dec, -1, 5), std::invalid_argument);
}

TEST(AttentionMaskText, RowMajorGrid) {
    AttentionMask m(2, 3);
    m.set(0, 1, true);
    m.set(1, 2, true);
    EXPECT_EQ(m.to_text(), "010\n001\n");
}
