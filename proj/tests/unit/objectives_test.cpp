#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "support/helpers.hpp"

using namespace tlab;

namespace {

const std::vector<int> kX{6, 7, 8};
const std::vector<int> kY{9, 10, 11, 12};

std::vector<int> slots() { return {9, 10, 11, 12, special::kEos}; }

}  // namespace

TEST(Corruption, SampleMaskedBasics) {
    Rng rng = make_rng(1);
    for (int i = 0; i < 200; ++i) {
        auto m = sample_masked(2, 7, 0.4, rng);
        EXPECT_FALSE(m.empty());
        for (auto p : m) {
            EXPECT_GE(p, 2u);
            EXPECT_LT(p, 7u);
        }
    }
    EXPECT_EQ(sample_masked(0, 4, 1.0, rng).size(), 4u);
    EXPECT_THROW(sample_masked(0, 4, 0.0, rng), std::invalid_argument);
    EXPECT_THROW(sample_masked(0, 4, 1.5, rng), std::invalid_argument);
    EXPECT_THROW(sample_masked(3, 3, 0.5, rng), std::invalid_argument);
}

TEST(Corruption, RateOverLongTargets) {
    Rng rng = make_rng(2);
    std::size_t hit = 0, total = 0;
    for (int i = 0; i < 2000; ++i) {
        hit += sample_masked(0, 20, 0.4, rng).size();
        total += 20;
    }
    EXPECT_NEAR(double(hit) / double(total), 0.4, 0.01);
}

TEST(Corruption, MlmCorruptTarget) {
    Rng rng = make_rng(3);
    auto [out, masked] = mlm_corrupt_target(kY, 0.5, rng);
    ASSERT_EQ(out.size(), kY.size());
    for (std::size_t i = 0; i < kY.size(); ++i) EXPECT_EQ(out[i], masked.count(i) ? special::kMask : kY[i]);
}

TEST(Corruption, PfPatternBoundaries) {
    Rng rng = make_rng(4);
    std::map<std::size_t, int> seen;
    for (int i = 0; i < 3000; ++i) {
        auto p = pf_sample_pattern(7, 3, 0.4, rng);
        EXPECT_EQ(p.boundary % 3, 0u);
        EXPECT_LT(p.boundary, 7u);
        for (auto m : p.masked) EXPECT_GE(m, p.boundary);
        ++seen[p.boundary];
    }
    ASSERT_EQ(seen.size(), 3u);
    for (auto [b, n] : seen) EXPECT_NEAR(n / 3000.0, 1.0 / 3.0, 0.04) << b;
    EXPECT_EQ(pf_sample_pattern(4, 10, 0.4, rng).boundary, 0u);
    EXPECT_THROW(pf_sample_pattern(4, 0, 0.4, rng), std::invalid_argument);
    EXPECT_THROW(pf_sample_pattern(0, 2, 0.4, rng), std::invalid_argument);
}

TEST(Corruption, BertSplit) {
    Rng rng = make_rng(5);
    std::size_t mask = 0, kept = 0, other = 0;
    std::vector<std::size_t> eligible(50);
    std::iota(eligible.begin(), eligible.end(), 0);
    for (int i = 0; i < 400; ++i) {
        std::vector<int> ids(50, 6);
        for (auto p : bert_corrupt(ids, eligible, 0.15, 40, rng)) {
            if (ids[p] == special::kMask)
                ++mask;
            else if (ids[p] == 6)
                ++kept;
            else
                ++other;
            EXPECT_FALSE(Vocab::is_special(ids[p]) && ids[p] != special::kMask);
        }
    }
    const double n = double(mask + kept + other);
    EXPECT_NEAR(mask / n, 0.8, 0.03);
    // random replacements may redraw the original id
    EXPECT_NEAR((kept + other) / n, 0.2, 0.03);
    EXPECT_GT(other, 0u);
}

TEST(Examples, DecoderTeacherForcing) {
    auto ex = ar_example(Framework::Dec, kX, kY);
    EXPECT_EQ(ex.tokens, (std::vector<int>{6, 7, 8, special::kBos, 9, 10, 11, 12}));
    EXPECT_EQ(ex.loss_positions, (std::vector<std::size_t>{3, 4, 5, 6, 7}));
    EXPECT_EQ(ex.gold, slots());
    EXPECT_NO_THROW(ex.validate());
}

TEST(Examples, EncoderDecoderTeacherForcing) {
    auto ex = ar_example(Framework::ED, kX, kY);
    EXPECT_EQ(ex.encoder_tokens, kX);
    EXPECT_EQ(ex.tokens, (std::vector<int>{special::kBos, 9, 10, 11, 12}));
    EXPECT_EQ(ex.loss_positions, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    EXPECT_EQ(ex.gold, slots());
    ASSERT_TRUE(ex.mask.cross.has_value());
}

TEST(Examples, ArRejectsOtherFrameworks) {
    EXPECT_THROW(ar_example(Framework::MLM, kX, kY), std::invalid_argument);
    EXPECT_THROW(ar_example(Framework::FGFree, kX, kY), std::invalid_argument);
    EXPECT_THROW(ar_example(Framework::Dec, {}, kY), std::invalid_argument);
    EXPECT_THROW(ar_example(Framework::Dec, kX, {}), std::invalid_argument);
}

TEST(Examples, MlmCorruptsOnlyLossSlots) {
    Rng rng = make_rng(6);
    for (int i = 0; i < 50; ++i) {
        auto ex = mlm_example(Framework::MLM, kX, kY, {}, rng);
        ASSERT_EQ(ex.tokens.size(), 8u);
        for (std::size_t p = 0; p < 3; ++p) EXPECT_EQ(ex.tokens[p], kX[p]);
        const auto s = slots();
        for (std::size_t k = 0; k < 5; ++k) {
            const std::size_t p = 3 + k;
            const bool loss = std::find(ex.loss_positions.begin(), ex.loss_positions.end(), p) != ex.loss_positions.end();
            EXPECT_EQ(ex.tokens[p], loss ? special::kMask : s[k]);
        }
        for (std::size_t k = 0; k < ex.gold.size(); ++k) EXPECT_EQ(ex.gold[k], s[ex.loss_positions[k] - 3]);
    }
}

TEST(Examples, PfLossOnlyPastBoundary) {
    Rng rng = make_rng(7);
    ExampleOptions o;
    o.interval = 2;
    std::set<std::size_t> first_loss;
    for (int i = 0; i < 200; ++i) {
        auto ex = mlm_example(Framework::PFFree, kX, kY, o, rng);
        const auto lo = *std::min_element(ex.loss_positions.begin(), ex.loss_positions.end());
        first_loss.insert(lo);
        // slots below the boundary stay intact
        for (std::size_t p = 3; p < lo; ++p) EXPECT_NE(ex.tokens[p], special::kMask);
    }
    EXPECT_GT(first_loss.size(), 2u);
}

TEST(Examples, FgMaskStream) {
    Rng rng = make_rng(8);
    auto ex = fg_example(Framework::FGFree, kX, kY, {}, rng);
    const auto& seq = ex.layout.sequence;
    EXPECT_EQ(ex.loss_positions.size(), 5u);
    for (std::size_t k = 0; k < ex.loss_positions.size(); ++k) {
        const auto& r = seq[ex.loss_positions[k]];
        EXPECT_EQ(r.stream, Stream::TargetMask);
        EXPECT_EQ(ex.tokens[ex.loss_positions[k]], special::kMask);
        EXPECT_EQ(ex.gold[k], slots()[r.slot]);
    }
    for (std::size_t p = 0; p < seq.size(); ++p)
        if (seq[p].stream == Stream::TargetToken) {
            EXPECT_EQ(ex.tokens[p], slots()[seq[p].slot]);
        }
}

TEST(Examples, PffgSupervisesFromBoundary) {
    Rng rng = make_rng(9);
    ExampleOptions o;
    o.interval = 2;
    std::set<std::size_t> counts;
    for (int i = 0; i < 100; ++i) {
        auto ex = fg_example(Framework::PFFGFree, kX, kY, o, rng);
        std::size_t lo = 99;
        for (auto p : ex.loss_positions) lo = std::min(lo, ex.layout.sequence[p].slot);
        EXPECT_EQ(lo % 2, 0u);
        EXPECT_EQ(ex.loss_positions.size(), 5 - lo);
        counts.insert(ex.loss_positions.size());
    }
    EXPECT_EQ(counts, (std::set<std::size_t>{1, 3, 5}));
}

TEST(Examples, StreamRateSubsamples) {
    Rng rng = make_rng(10);
    ExampleOptions o;
    o.stream_rate = 0.3;
    std::size_t total = 0;
    for (int i = 0; i < 100; ++i) total += fg_example(Framework::FGFree, kX, kY, o, rng).loss_positions.size();
    EXPECT_LT(total, 400u);
    EXPECT_GE(total, 100u);
}

TEST(Examples, MakeExampleDispatch) {
    Rng rng = make_rng(11);
    for (Framework f : kAllFrameworks) {
        auto ex = make_example(f, kX, kY, {}, rng);
        EXPECT_EQ(ex.framework(), f);
        EXPECT_NO_THROW(ex.validate());
    }
    EXPECT_THROW(mlm_example(Framework::Dec, kX, kY, {}, rng), std::invalid_argument);
    EXPECT_THROW(fg_example(Framework::MLM, kX, kY, {}, rng), std::invalid_argument);
}

TEST(Pretraining, ArExample) {
    auto ex = pretrain_ar_example({6, 7, special::kSep, 8});
    EXPECT_EQ(ex.tokens, (std::vector<int>{special::kBos, 6, 7, special::kSep, 8}));
    EXPECT_EQ(ex.gold, (std::vector<int>{6, 7, special::kSep, 8, special::kEos}));
    for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) EXPECT_EQ(ex.mask.self.allowed(i, j), j <= i);
    EXPECT_THROW(pretrain_ar_example({}), std::invalid_argument);
}

TEST(Pretraining, MlmExample) {
    Rng rng = make_rng(12);
    for (int i = 0; i < 50; ++i) {
        auto ex = pretrain_mlm_example({6, 7, 8}, {9, 10}, 24, rng);
        ASSERT_EQ(ex.tokens.size(), 6u);
        EXPECT_EQ(ex.tokens[3], special::kSep);
        EXPECT_FALSE(ex.loss_positions.empty());
        for (auto p : ex.loss_positions) EXPECT_NE(p, 3u);
        EXPECT_EQ(ex.layout.sequence[4].type_id, 1);
        EXPECT_EQ(ex.layout.sequence[3].type_id, 0);
    }
}

TEST(Padding, IsolatedPadRows) {
    auto ex = ar_example(Framework::Dec, kX, kY);
    auto p = pad_example(ex, 11);
    EXPECT_EQ(p.length(), 11u);
    for (std::size_t i = 0; i < 11; ++i)
        for (std::size_t j = 0; j < 11; ++j) {
            if (i >= 8 || j >= 8)
                EXPECT_EQ(p.mask.self.allowed(i, j), i == j);
            else
                EXPECT_EQ(p.mask.self.allowed(i, j), ex.mask.self.allowed(i, j));
        }
    EXPECT_THROW(pad_example(ex, 5), std::invalid_argument);
    EXPECT_THROW(pad_example(ex, kMaxInputLength + 1), std::length_error);
}

TEST(Padding, EncoderDecoderCross) {
    auto ex = ar_example(Framework::ED, kX, kY);
    auto p = pad_example(ex, 7, 5);
    ASSERT_TRUE(p.mask.cross.has_value());
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 3; j < 5; ++j) EXPECT_FALSE(p.mask.cross->allowed(i, j));
    EXPECT_EQ(p.encoder_tokens.size(), 5u);
}

TEST(Loss, UniformLogitsGiveLogVocab) {
    auto model = test_support::tiny_model(Framework::Dec);
    for (auto& [name, t] : model.params.tensors()) std::fill(t.data().begin(), t.data().end(), 0.0f);
    std::vector<TrainingExample> batch{ar_example(Framework::Dec, kX, kY)};
    NoGradGuard g;
    EXPECT_NEAR(batch_loss(model, std::span<const TrainingExample>(batch)).item(), std::log(24.0), 1e-6);
}

TEST(Loss, BatchIsPositionWeightedMean) {
    Rng rng = make_rng(13);
    for (Framework f : kAllFrameworks) {
        auto model = test_support::tiny_model(f, 3, test_support::tiny_config(), 0.2);
        std::vector<TrainingExample> exs{make_example(f, kX, kY, {}, rng), make_example(f, {6, 7}, {8, 9, 10, 11, 12, 13}, {}, rng)};
        NoGradGuard g;
        double num = 0, den = 0;
        for (const auto& e : exs) {
            std::vector<TrainingExample> one{e};
            num += batch_loss(model, std::span<const TrainingExample>(one)).item() * double(e.gold.size());
            den += double(e.gold.size());
        }
        EXPECT_NEAR(batch_loss(model, std::span<const TrainingExample>(exs)).item(), num / den, 1e-5) << to_string(f);
    }
}

TEST(Loss, RejectsMixedBatch) {
    std::vector<TrainingExample> exs{ar_example(Framework::Dec, kX, kY), ar_example(Framework::ED, kX, kY)};
    EXPECT_THROW(prepare_batch(exs), std::invalid_argument);
    EXPECT_THROW(prepare_batch({}), std::invalid_argument);
    auto dec = test_support::tiny_model(Framework::Dec);
    std::vector<TrainingExample> ed{ar_example(Framework::ED, kX, kY)};
    NoGradGuard g;
    EXPECT_THROW(batch_loss(dec, std::span<const TrainingExample>(ed)), std::invalid_argument);
}
