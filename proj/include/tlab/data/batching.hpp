#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iostream>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "tlab/data/corpus.hpp"
#include "tlab/data/vocab.hpp"
#include "tlab/layout/framework.hpp"
#include "tlab/layout/layout.hpp"
#include "tlab/numcore/rng.hpp"
#include "tlab/objectives/examples.hpp"

namespace tlab {

/// A dialogue sample as token ids.
struct EncodedSample {
    std::vector<int> source;
    std::vector<int> target;
};

inline EncodedSample encode_sample(const DialogueSample& s, const Vocab& vocab) {
    return {tokenize(s.source_text(), vocab), tokenize(s.response, vocab)};
}

inline std::vector<EncodedSample> encode_corpus(const std::vector<DialogueSample>& samples, const Vocab& vocab) {
    std::vector<EncodedSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(encode_sample(s, vocab));
    return out;
}

/// Longest sequence the framework builds for a source/response pair.
inline std::size_t framework_length(Framework f, std::size_t source_len, std::size_t response_len) {
    const std::size_t slots = response_len + 1;
    if (is_encoder_decoder(f)) return std::max(source_len, slots);
    if (uses_mask_stream(f)) return source_len + 2 * slots - 1;
    return source_len + slots;
}

/// Deterministic epoch shuffling of [0, count) into fixed-size batches. A
/// trailing partial batch is dropped unless the whole set is smaller than
/// one batch.
class BatchOrder {
  public:
    BatchOrder(std::size_t count, std::size_t batch_size, std::uint64_t seed)
        : count_(count), batch_size_(std::min(batch_size, count)), seed_(seed) {
        if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
        if (count == 0) throw std::invalid_argument("batch order over an empty corpus");
        shuffle();
    }

    std::vector<std::size_t> next() {
        if (cursor_ + batch_size_ > order_.size()) {
            ++epoch_;
            shuffle();
        }
        std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                     order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + batch_size_));
        cursor_ += batch_size_;
        return out;
    }

    std::size_t epoch() const { return epoch_; }

  private:
    void shuffle() {
        order_.resize(count_);
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        Rng rng = make_rng(seed_, 0, epoch_);
        std::shuffle(order_.begin(), order_.end(), rng);
        cursor_ = 0;
    }

    std::size_t count_, batch_size_;
    std::uint64_t seed_;
    std::size_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
};

/// Stream of fine-tuning batches for one framework. Samples too long for the
/// framework's layout are dropped (with a warning) up front; corruption
/// randomness is drawn from a per-step stream.
class BatchStream {
  public:
    BatchStream(std::vector<EncodedSample> samples, Framework framework, std::size_t batch_size, std::uint64_t seed,
                ExampleOptions options = {}, bool warn = true)
        : framework_(framework), seed_(seed), options_(options) {
        std::size_t dropped = 0;
        for (auto& s : samples) {
            if (s.source.empty() || s.target.empty() ||
                framework_length(framework, s.source.size(), s.target.size()) > kMaxInputLength) {
                ++dropped;
                continue;
            }
            samples_.push_back(std::move(s));
        }
        if (dropped && warn)
            std::cerr << "warning: skipped " << dropped << " samples exceeding the input budget of "
                      << kMaxInputLength << '\n';
        if (samples_.empty()) throw std::invalid_argument("no trainable samples for " + std::string(to_string(framework)));
        order_.emplace(samples_.size(), batch_size, seed);
    }

    /// Examples of the next batch, padded to the longest member.
    std::vector<TrainingExample> next() {
        Rng rng = make_rng(seed_, 1, step_++);
        std::vector<TrainingExample> out;
        std::size_t n = 0, m = 0;
        for (auto i : order_->next()) {
            out.push_back(make_example(framework_, samples_[i].source, samples_[i].target, options_, rng));
            n = std::max(n, out.back().length());
            m = std::max(m, out.back().encoder_length());
        }
        for (auto& ex : out) ex = pad_example(std::move(ex), n, m);
        return out;
    }

    std::size_t size() const { return samples_.size(); }
    std::size_t epoch() const { return order_->epoch(); }

  private:
    Framework framework_;
    std::uint64_t seed_;
    ExampleOptions options_;
    std::vector<EncodedSample> samples_;
    std::optional<BatchOrder> order_;
    std::uint64_t step_ = 0;
};

inline BatchStream batch_iter(const std::vector<EncodedSample>& corpus, Framework framework, std::size_t batch_size,
                              std::uint64_t seed, ExampleOptions options = {}) {
    return BatchStream(corpus, framework, batch_size, seed, options);
}

}  // namespace tlab
