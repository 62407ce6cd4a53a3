#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "support/helpers.hpp"

using namespace tlab;

namespace {

Checkpoint sample_checkpoint(bool ed = false) {
    Checkpoint c;
    c.config = test_support::tiny_config(1, 8, 2);
    c.encoder_decoder = ed;
    c.objective = PretrainObjective::MLM;
    c.framework = ed ? std::optional(Framework::ED) : std::optional(Framework::PFFGFree);
    c.step = 17;
    c.seed = 99;
    c.interval = 3;
    c.vocab = Vocab{}.tokens();
    for (int i = special::kCount; i < 24; ++i) c.vocab.push_back("w" + std::to_string(i));
    c.params = init_parameters<float>(c.config, ed, 5, 0.5);
    // awkward bit patterns must survive the trip
    auto& b = c.params.get(ed ? "dec.ln_f.bias" : "ln_f.bias");
    b.data()[0] = -0.0f;
    b.data()[1] = std::numeric_limits<float>::denorm_min();
    b.data()[2] = std::nextafter(1.0f, 2.0f);
    return c;
}

std::filesystem::path temp_path(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("tlab_models_test_" + name);
}

std::string set_u32(std::string bytes, std::size_t at, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes[at + i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    return bytes;
}

std::string reseal(std::string bytes) {
    const std::size_t body = bytes.size() - 4;
    return set_u32(bytes, body, detail::crc32_of(bytes, body));
}

bool same(const Tensor<float>& a, const Tensor<float>& b) {
    return a.shape() == b.shape() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

std::vector<DialogueSample> tiny_corpus() { return synth_generate(SynthTask::Reverse, 40, 3, {3, 5, 1}); }

}  // namespace

TEST(Init, DeterministicAndRoleAware) {
    auto c = test_support::tiny_config();
    auto a = init_parameters<float>(c, false, 1);
    auto b = init_parameters<float>(c, false, 1);
    auto d = init_parameters<float>(c, false, 2);
    EXPECT_TRUE(a.equals(b));
    EXPECT_FALSE(a.equals(d));
    for (float v : a.get("layer0.attn.bq").data()) EXPECT_EQ(v, 0.0f);
    for (float v : a.get("layer1.ln1.gain").data()) EXPECT_EQ(v, 1.0f);
    const auto w = a.get("emb.token").data();
    double ss = 0;
    for (float v : w) ss += double(v) * v;
    EXPECT_NEAR(std::sqrt(ss / double(w.size())), kInitStd, 0.004);
}

TEST(Checkpoint, RoundTripBitExact) {
    for (bool ed : {false, true}) {
        auto c = sample_checkpoint(ed);
        auto back = deserialize_checkpoint(serialize_checkpoint(c));
        EXPECT_TRUE(back == c);
        EXPECT_EQ(std::signbit(back.params.get(ed ? "dec.ln_f.bias" : "ln_f.bias").data()[0]), true);
        EXPECT_EQ(serialize_checkpoint(back), serialize_checkpoint(c));
    }
}

TEST(Checkpoint, FileRoundTrip) {
    auto c = sample_checkpoint();
    const auto p = temp_path("rt.ckpt");
    save_checkpoint(c, p.string());
    EXPECT_FALSE(std::filesystem::exists(p.string() + ".tmp"));
    EXPECT_TRUE(load_checkpoint(p.string()) == c);
    std::filesystem::remove(p);
    EXPECT_THROW(load_checkpoint(p.string()), CheckpointError);
}

TEST(Checkpoint, LayoutOfHeader) {
    const auto bytes = serialize_checkpoint(sample_checkpoint());
    EXPECT_EQ(bytes.substr(0, 4), "DFTM");
    detail::ByteReader r(bytes, bytes.size());
    r.take(4);
    EXPECT_EQ(r.u32(), 1u);
    const auto header = r.take(r.u32());
    EXPECT_NE(header.find("layers=1\n"), std::string::npos);
    EXPECT_NE(header.find("objective=mlm\n"), std::string::npos);
    EXPECT_NE(header.find("framework=pffg-free\n"), std::string::npos);
    EXPECT_NE(header.find("interval=3\n"), std::string::npos);
}

TEST(Checkpoint, RejectsCorruption) {
    const auto good = serialize_checkpoint(sample_checkpoint());
    auto flipped = good;
    flipped[good.size() / 2] ^= 0x10;
    EXPECT_THROW(deserialize_checkpoint(flipped), CheckpointError);
    EXPECT_THROW(deserialize_checkpoint(good.substr(0, good.size() - 9)), CheckpointError);
    EXPECT_THROW(deserialize_checkpoint(good.substr(0, 10)), CheckpointError);
    auto magic = good;
    magic[0] = 'X';
    EXPECT_THROW(deserialize_checkpoint(magic), CheckpointError);
    try {
        deserialize_checkpoint(reseal(set_u32(good, 4, 2)));
        FAIL() << "version 2 accepted";
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
    }
    // a resealed but shortened tensor table leaves trailing bytes
    auto extra = good.substr(0, good.size() - 4) + std::string(4, '\0');
    extra += "0000";
    EXPECT_THROW(deserialize_checkpoint(reseal(extra)), CheckpointError);
}

TEST(Checkpoint, RejectsWellFormedButMismatchedTensors) {
    const auto full = sample_checkpoint();
    auto missing = full;
    missing.params = ParameterSet<float>{};
    for (const auto& [name, t] : full.params.tensors())
        if (name != "ln_f.gain") missing.params.set(name, t);
    EXPECT_THROW(deserialize_checkpoint(serialize_checkpoint(missing)), CheckpointError);
    auto wrong = sample_checkpoint();
    wrong.params.set("ln_f.bias", Tensor<float>::zeros({3}));
    EXPECT_THROW(deserialize_checkpoint(serialize_checkpoint(wrong)), CheckpointError);
    auto stray = sample_checkpoint();
    stray.params.set("extra", Tensor<float>::zeros({2}));
    EXPECT_THROW(deserialize_checkpoint(serialize_checkpoint(stray)), CheckpointError);
    // a record claiming far more data than the file holds fails before allocating
    auto huge = sample_checkpoint();
    huge.params = ParameterSet<float>{};
    huge.params.set("emb.token", Tensor<float>::zeros({1}));
    auto bytes = serialize_checkpoint(huge);
    const auto dims = bytes.size() - 4 - 4 - 4;  // crc, data, dim
    EXPECT_THROW(deserialize_checkpoint(reseal(set_u32(bytes, dims, 0xFFFFFFFFu))), CheckpointError);
}

TEST(Schedule, LinearWarmup) {
    TrainConfig c;
    c.lr = 1e-3;
    c.warmup = 100;
    EXPECT_DOUBLE_EQ(scheduled_lr(c, 0), 1e-5);
    EXPECT_DOUBLE_EQ(scheduled_lr(c, 49), 5e-4);
    EXPECT_DOUBLE_EQ(scheduled_lr(c, 100), 1e-3);
    EXPECT_DOUBLE_EQ(scheduled_lr(c, 5000), 1e-3);
    c.warmup = 0;
    EXPECT_DOUBLE_EQ(scheduled_lr(c, 0), 1e-3);
}

TEST(Pretrain, LossFallsAndTagsObjective) {
    const auto corpus = synth_generate(SynthTask::GrammarLm, 64, 4);
    const auto vocab = build_vocab(corpus_texts(corpus));
    auto cfg = test_support::tiny_config(1, 16, 2, vocab.size());
    for (auto obj : {PretrainObjective::AR, PretrainObjective::MLM}) {
        std::vector<double> losses;
        TrainConfig t;
        t.steps = 200;
        t.batch_size = 16;
        t.warmup = 5;
        t.lr = 3e-3;
        t.on_step = [&](std::size_t, double l) { losses.push_back(l); };
        auto ck = pretrain(cfg, corpus, vocab, obj, t);
        EXPECT_EQ(ck.objective, obj);
        EXPECT_FALSE(ck.framework.has_value());
        EXPECT_EQ(ck.step, 200u);
        EXPECT_EQ(ck.vocab, vocab.tokens());
        ASSERT_EQ(losses.size(), 200u);
        const double head = std::accumulate(losses.begin(), losses.begin() + 10, 0.0) / 10;
        const double tail = std::accumulate(losses.end() - 10, losses.end(), 0.0) / 10;
        EXPECT_LT(tail, head - 0.5) << to_string(obj);
    }
}

TEST(Pretrain, RejectsBadInputs) {
    const auto corpus = synth_generate(SynthTask::GrammarLm, 8, 4);
    const auto vocab = build_vocab(corpus_texts(corpus));
    TrainConfig t;
    t.steps = 1;
    EXPECT_THROW(pretrain(test_support::tiny_config(1, 16, 2, vocab.size() + 1), corpus, vocab, PretrainObjective::AR, t),
                 std::invalid_argument);
    EXPECT_THROW(pretrain(test_support::tiny_config(1, 16, 2, vocab.size()), corpus, vocab, PretrainObjective::None, t),
                 std::invalid_argument);
    EXPECT_THROW(pretrain(test_support::tiny_config(1, 16, 2, vocab.size()), {}, vocab, PretrainObjective::AR, t),
                 std::invalid_argument);
}

TEST(Finetune, LineageAndInit) {
    const auto corpus = tiny_corpus();
    const auto vocab = build_vocab(corpus_texts(corpus));
    const auto enc = encode_corpus(corpus, vocab);
    TrainConfig pt;
    pt.steps = 2;
    pt.batch_size = 4;
    auto cfg = test_support::tiny_config(1, 16, 2, vocab.size());
    auto ar = pretrain(cfg, corpus, vocab, PretrainObjective::AR, pt);
    auto mlm = pretrain(cfg, corpus, vocab, PretrainObjective::MLM, pt);

    FinetuneConfig fc;
    fc.train.steps = 2;
    fc.train.batch_size = 4;
    try {
        finetune(Framework::FGFree, ar, enc, vocab, fc);
        FAIL() << "lineage mismatch accepted";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("lineage"), std::string::npos);
    }
    EXPECT_THROW(finetune(Framework::Dec, mlm, enc, vocab, fc), std::invalid_argument);
    fc.force_lineage = true;
    EXPECT_EQ(finetune(Framework::Dec, mlm, enc, vocab, fc).objective, PretrainObjective::MLM);
    fc.force_lineage = false;

    auto done = finetune(Framework::FGFree, mlm, enc, vocab, fc);
    EXPECT_EQ(done.framework, Framework::FGFree);
    EXPECT_EQ(done.objective, PretrainObjective::MLM);
    EXPECT_NO_THROW(finetune(Framework::MLM, done, enc, vocab, fc));
    EXPECT_THROW(finetune(Framework::ED, done, enc, vocab, fc), std::invalid_argument);

    auto random = finetune(Framework::MLM, std::nullopt, enc, vocab, [&] {
        auto f = fc;
        f.model = cfg;
        return f;
    }());
    EXPECT_EQ(random.objective, PretrainObjective::None);

    auto other = build_vocab({"unrelated words only"});
    EXPECT_THROW(finetune(Framework::MLM, mlm, encode_corpus(corpus, other), other, fc), std::invalid_argument);
}

TEST(Finetune, EncoderDecoderCopiesBothStacks) {
    const auto corpus = tiny_corpus();
    const auto vocab = build_vocab(corpus_texts(corpus));
    TrainConfig pt;
    pt.steps = 2;
    pt.batch_size = 4;
    auto ar = pretrain(test_support::tiny_config(1, 16, 2, vocab.size()), corpus, vocab, PretrainObjective::AR, pt);
    auto p = finetune_init_params(Framework::ED, ar, 1);
    EXPECT_TRUE(same(p.get("enc.layer0.attn.wq"), ar.params.get("layer0.attn.wq")));
    EXPECT_TRUE(same(p.get("dec.layer0.ffn.w1"), ar.params.get("layer0.ffn.w1")));
    EXPECT_TRUE(same(p.get("emb.token"), ar.params.get("emb.token")));
    for (float v : p.get("emb.type").data()) EXPECT_EQ(v, 0.0f);
    EXPECT_TRUE(p.contains("dec.layer0.xattn.wq"));
    auto dec = finetune_init_params(Framework::Dec, ar, 1);
    EXPECT_EQ(dec.size(), ar.params.size());
}

TEST(Finetune, DeterministicInSeed) {
    const auto corpus = tiny_corpus();
    const auto vocab = build_vocab(corpus_texts(corpus));
    const auto enc = encode_corpus(corpus, vocab);
    FinetuneConfig fc;
    fc.train.steps = 3;
    fc.train.batch_size = 8;
    fc.model = test_support::tiny_config(1, 16, 2);
    auto a = finetune(Framework::PFFree, std::nullopt, enc, vocab, fc);
    auto b = finetune(Framework::PFFree, std::nullopt, enc, vocab, fc);
    EXPECT_TRUE(a == b);
    fc.train.seed = 2;
    EXPECT_FALSE(finetune(Framework::PFFree, std::nullopt, enc, vocab, fc) == a);
}
