#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/data/batching.hpp"
#include "tlab/data/corpus.hpp"
#include "tlab/data/vocab.hpp"
#include "tlab/models/checkpoint.hpp"
#include "tlab/models/init.hpp"
#include "tlab/numcore/adam.hpp"
#include "tlab/objectives/examples.hpp"
#include "tlab/objectives/loss.hpp"

namespace tlab {

struct TrainConfig {
    std::size_t steps = 2000;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::size_t warmup = 100;
    std::uint64_t seed = 1;
    /// Called after every step with (1-based step, batch loss).
    std::function<void(std::size_t, double)> on_step;
};

inline double scheduled_lr(const TrainConfig& c, std::size_t step) {
    if (c.warmup == 0 || step >= c.warmup) return c.lr;
    return c.lr * static_cast<double>(step + 1) / static_cast<double>(c.warmup);
}

/// Runs `steps` Adam updates; `next_batch(step)` supplies examples.
inline void train_loop(TransformerModel<float>& model, const TrainConfig& config,
                       const std::function<std::vector<TrainingExample>(std::size_t)>& next_batch) {
    model.params.set_requires_grad(true);
    OptimizerState<float> state;
    state.config.lr = config.lr;
    for (std::size_t step = 0; step < config.steps; ++step) {
        const auto examples = next_batch(step);
        model.params.zero_grad();
        auto loss = batch_loss(model, std::span<const TrainingExample>(examples));
        const double value = loss.item();
        if (!std::isfinite(value)) throw std::runtime_error("non-finite loss at step " + std::to_string(step + 1));
        backward(loss);
        state.config.lr = scheduled_lr(config, step);
        adam_step(model.params.tensors(), state);
        if (config.on_step) config.on_step(step + 1, value);
    }
    model.params.set_requires_grad(false);
    model.params.zero_grad();
}

/// Text of a pretraining sample as two token segments.
inline std::pair<std::vector<int>, std::vector<int>> pretrain_segments(const DialogueSample& s, const Vocab& vocab) {
    return {tokenize(s.source_text(), vocab), tokenize(s.response, vocab)};
}

/// Tiny language-model pretraining. AR: causal attention, next-token loss
/// over "first [SEP] second". MLM: bidirectional attention with 15%
/// 80/10/10 corruption over the two segments.
inline Checkpoint pretrain(const ModelConfig& config, const std::vector<DialogueSample>& corpus, const Vocab& vocab,
                           PretrainObjective objective, const TrainConfig& train) {
    if (corpus.empty()) throw std::invalid_argument("pretrain: empty corpus");
    if (objective == PretrainObjective::None) throw std::invalid_argument("pretrain: objective must be ar or mlm");
    if (config.vocab_size != vocab.size())
        throw std::invalid_argument("pretrain: config vocab_size " + std::to_string(config.vocab_size) +
                                    " differs from vocabulary of " + std::to_string(vocab.size()));
    std::vector<std::pair<std::vector<int>, std::vector<int>>> texts;
    for (const auto& s : corpus) {
        auto seg = pretrain_segments(s, vocab);
        if (seg.first.size() + seg.second.size() + 1 < kMaxInputLength) texts.push_back(std::move(seg));
    }
    if (texts.empty()) throw std::invalid_argument("pretrain: no sample fits the input budget");

    auto model = init_model<float>(config, train.seed);
    BatchOrder order(texts.size(), train.batch_size, train.seed);
    train_loop(model, train, [&](std::size_t step) {
        Rng rng = make_rng(train.seed, 1, step);
        std::vector<TrainingExample> out;
        for (auto i : order.next()) {
            const auto& [a, b] = texts[i];
            if (objective == PretrainObjective::AR) {
                std::vector<int> text = a;
                text.push_back(special::kSep);
                text.insert(text.end(), b.begin(), b.end());
                out.push_back(pretrain_ar_example(text));
            } else {
                out.push_back(pretrain_mlm_example(a, b, vocab.size(), rng));
            }
        }
        return out;
    });

    Checkpoint c;
    c.config = config;
    c.objective = objective;
    c.step = train.steps;
    c.seed = train.seed;
    c.vocab = vocab.tokens();
    c.params = std::move(model.params);
    return c;
}

struct FinetuneConfig {
    TrainConfig train;
    ExampleOptions example;
    bool force_lineage = false;
    ModelConfig model;  ///< architecture for random init (ignored with a checkpoint)
};

/// Starting weights for `framework`: copies of a decoder-only checkpoint,
/// duplicated into both stacks for ED with fresh cross-attention.
inline ParameterSet<float> finetune_init_params(Framework framework, const Checkpoint& init, std::uint64_t seed) {
    if (init.encoder_decoder) throw std::invalid_argument("fine-tune init must come from a decoder-only checkpoint");
    if (init.framework && is_encoder_decoder(*init.framework) != is_encoder_decoder(framework))
        throw std::invalid_argument("checkpoint architecture does not match framework " +
                                    std::string(to_string(framework)));
    ParameterSet<float> out;
    if (!is_encoder_decoder(framework)) {
        out = init.params.clone();
    } else {
        const auto fresh = init_parameters<float>(init.config, true, seed);
        for (const auto& [name, t] : fresh.tensors()) {
            std::string source;
            if (name.rfind("enc.", 0) == 0 || name.rfind("dec.", 0) == 0) {
                const bool cross = name.find(".xattn.") != std::string::npos || name.find(".lnx.") != std::string::npos;
                if (!cross) source = name.substr(4);
            } else {
                source = name;
            }
            out.set(name, source.empty() ? t : init.params.get(source).clone());
        }
    }
    // Left-to-right pretraining never sees the target type id; start the
    // type table from zero so the fine-tune adds it cleanly.
    if (init.objective == PretrainObjective::AR) {
        auto& types = out.get("emb.type");
        std::fill(types.data().begin(), types.data().end(), 0.0f);
    }
    return out;
}

/// Fine-tunes `framework` from `init` (or random weights). A checkpoint from
/// the other pretraining lineage is refused unless `force_lineage` is set.
inline Checkpoint finetune(Framework framework, const std::optional<Checkpoint>& init,
                           const std::vector<EncodedSample>& corpus, const Vocab& vocab, const FinetuneConfig& config) {
    if (corpus.empty()) throw std::invalid_argument("finetune: empty corpus");
    TransformerModel<float> model;
    PretrainObjective lineage = PretrainObjective::None;
    if (init) {
        const auto expected = traits(framework).lineage;
        if (init->objective != expected && !config.force_lineage)
            throw std::invalid_argument("pretraining lineage mismatch: " + std::string(to_string(framework)) +
                                        " expects " + std::string(to_string(expected)) +
                                        "-pretrained weights, checkpoint is tagged " +
                                        std::string(to_string(init->objective)));
        if (init->vocab != vocab.tokens()) throw std::invalid_argument("finetune: checkpoint vocabulary differs from corpus vocabulary");
        model.config = init->config;
        model.params = finetune_init_params(framework, *init, config.train.seed);
        lineage = init->objective;
    } else {
        model.config = config.model;
        model.config.vocab_size = vocab.size();
        model.params = init_parameters<float>(model.config, is_encoder_decoder(framework), config.train.seed);
    }
    model.encoder_decoder = is_encoder_decoder(framework);

    BatchStream stream(corpus, framework, config.train.batch_size, config.train.seed, config.example);
    train_loop(model, config.train, [&](std::size_t) { return stream.next(); });

    Checkpoint c;
    c.config = model.config;
    c.objective = lineage;
    c.framework = framework;
    c.encoder_decoder = model.encoder_decoder;
    c.step = config.train.steps;
    c.seed = config.train.seed;
    c.interval = config.example.interval;
    c.vocab = vocab.tokens();
    c.params = std::move(model.params);
    return c;
}

}  // namespace tlab
