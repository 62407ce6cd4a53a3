#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iostream>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/data/vocab.hpp"
#include "tlab/decode/cache.hpp"
#include "tlab/decode/inference.hpp"
#include "tlab/numcore/kernels.hpp"
#include "tlab/transformer/model.hpp"

namespace tlab {

struct DecodeParams {
    std::size_t beam_size = 4;
    std::size_t min_len = 1;
    std::size_t max_len = 32;
    std::size_t interval = 5;
    /// Token ids exempt from repeated-unigram blocking besides the specials
    /// (e.g. punctuation).
    std::vector<int> repeatable;

    void validate() const {
        if (beam_size == 0) throw std::invalid_argument("beam size must be at least 1");
        if (min_len == 0 || min_len > max_len)
            throw std::invalid_argument("decode lengths must satisfy 1 <= min_len <= max_len");
        if (max_len > kMaxInputLength) throw std::invalid_argument("max_len exceeds maximum input length");
    }
};

/// Ids of punctuation-only words, which may repeat in a response.
inline std::vector<int> punctuation_ids(const Vocab& vocab) {
    std::vector<int> out;
    for (std::size_t i = special::kCount; i < vocab.size(); ++i) {
        const auto& w = vocab.token(static_cast<int>(i));
        if (!w.empty() && std::all_of(w.begin(), w.end(), [](unsigned char ch) { return std::ispunct(ch) != 0; }))
            out.push_back(static_cast<int>(i));
    }
    return out;
}

inline constexpr double kBlocked = -std::numeric_limits<double>::infinity();

/// Masks out tokens the response may not emit next: [PAD], [UNK], [BOS],
/// [SEP] and [MASK] always; any non-special, non-exempt token already in the
/// response; [EOS] while the response is shorter than min_len.
inline std::vector<double> apply_constraints(std::span<const double> scores, std::span<const int> response,
                                             const DecodeParams& params) {
    std::vector<double> out(scores.begin(), scores.end());
    for (int s : {special::kPad, special::kUnk, special::kBos, special::kSep, special::kMask})
        if (static_cast<std::size_t>(s) < out.size()) out[static_cast<std::size_t>(s)] = kBlocked;
    for (int id : response) {
        if (Vocab::is_special(id)) continue;
        if (std::find(params.repeatable.begin(), params.repeatable.end(), id) != params.repeatable.end()) continue;
        if (id >= 0 && static_cast<std::size_t>(id) < out.size()) out[static_cast<std::size_t>(id)] = kBlocked;
    }
    if (response.size() < params.min_len && static_cast<std::size_t>(special::kEos) < out.size())
        out[special::kEos] = kBlocked;
    if (std::none_of(out.begin(), out.end(), [](double v) { return std::isfinite(v); }))
        throw std::runtime_error("constraint exhaustion: every token is blocked (vocabulary must exceed max_len)");
    return out;
}

template <typename State>
struct Hypothesis {
    std::vector<int> tokens;  ///< response tokens, without the final [EOS]
    double log_prob = 0.0;
    bool finished = false;
    std::vector<double> step_log_probs;  ///< log-probability of each chosen token, [EOS] included
    std::shared_ptr<const State> state;
};

struct DecodeResult {
    std::vector<int> tokens;
    double log_prob = 0.0;
    bool finished = false;
    std::vector<double> step_log_probs;
};

/// Observer of every scored (step, response prefix, log-prob vector).
using StepTrace = std::function<void(std::size_t, std::span<const int>, std::span<const float>)>;

namespace detail {

template <typename State>
bool better(const Hypothesis<State>& a, const Hypothesis<State>& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
    return a.tokens < b.tokens;
}

}  // namespace detail

/// Beam search over any scorer providing
///   State start();
///   std::vector<float> log_probs(const State&);      // at the state's step
///   State advance(const State&, int token, std::size_t t);
///   bool fits(std::size_t t);                          // step t input within budget
/// Hypotheses ending in [EOS] move to the finished pool; the search stops
/// once no live hypothesis can beat the best finished one.
template <typename Scorer>
DecodeResult beam_core(Scorer& scorer, const DecodeParams& params, const StepTrace& trace = {}) {
    params.validate();
    using State = typename Scorer::State;
    using Hyp = Hypothesis<State>;
    std::vector<Hyp> live(1);
    live[0].state = std::make_shared<const State>(scorer.start());
    std::vector<Hyp> finished;
    bool overflow = false;

    for (std::size_t t = 0; t < params.max_len && !live.empty(); ++t) {
        std::vector<Hyp> candidates;
        for (const auto& h : live) {
            const auto lp = scorer.log_probs(*h.state);
            if (trace) trace(t, h.tokens, lp);
            std::vector<double> scores(lp.begin(), lp.end());
            const auto adjusted = apply_constraints(scores, h.tokens, params);
            for (std::size_t v = 0; v < adjusted.size(); ++v) {
                if (!std::isfinite(adjusted[v])) continue;
                Hyp c;
                c.tokens = h.tokens;
                c.log_prob = h.log_prob + adjusted[v];
                c.step_log_probs = h.step_log_probs;
                c.step_log_probs.push_back(adjusted[v]);
                c.state = h.state;
                if (static_cast<int>(v) == special::kEos)
                    c.finished = true;
                else
                    c.tokens.push_back(static_cast<int>(v));
                candidates.push_back(std::move(c));
            }
        }
        const std::size_t keep = std::min(params.beam_size, candidates.size());
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                          detail::better<State>);
        candidates.resize(keep);
        live.clear();
        for (auto& c : candidates) {
            if (c.finished) {
                finished.push_back(std::move(c));
                continue;
            }
            if (t + 1 < params.max_len) {
                if (!scorer.fits(t + 1)) {
                    overflow = true;
                    c.finished = true;
                    finished.push_back(std::move(c));
                    continue;
                }
                c.state = std::make_shared<const State>(scorer.advance(*c.state, c.tokens.back(), t));
            }
            live.push_back(std::move(c));
        }
        if (!finished.empty() && !live.empty()) {
            const auto best_done = std::min_element(finished.begin(), finished.end(), detail::better<State>);
            const auto best_live = std::min_element(live.begin(), live.end(), detail::better<State>);
            if (best_done->log_prob >= best_live->log_prob) break;
        }
    }
    if (overflow) std::cerr << "warning: decoding context overflow; hypothesis force-finished\n";
    const auto& pool = finished.empty() ? live : finished;
    if (pool.empty()) throw std::logic_error("beam search produced no hypothesis");
    const auto& best = *std::min_element(pool.begin(), pool.end(), detail::better<State>);
    return {best.tokens, best.log_prob, best.finished, best.step_log_probs};
}

/// Scorer backed by the per-hypothesis incremental cache.
class CachedScorer {
  public:
    using State = DecodeCache;

    CachedScorer(const IncrementalModel& model, std::span<const int> source) : model_(model), source_(source) {}

    State start() { return start_cache(model_, source_); }
    std::vector<float> log_probs(const State& s) { return cached_log_probs(model_, s); }
    State advance(const State& s, int token, std::size_t t) { return advance_cache(model_, s, token, t); }
    bool fits(std::size_t t) const { return step_fits(model_.framework(), source_.size(), t); }

    static bool step_fits(Framework f, std::size_t S, std::size_t t) {
        const std::size_t slots = t + 1;
        const std::size_t n = is_encoder_decoder(f) ? slots : uses_mask_stream(f) ? S + 2 * slots - 1 : S + slots;
        return n <= kMaxInputLength;
    }

  private:
    const IncrementalModel& model_;
    std::span<const int> source_;
};

/// Log-probabilities at step t computed from scratch with the batched
/// forward (no cache).
inline std::vector<float> step_scores(const TransformerModel<float>& model, Framework framework,
                                      std::span<const int> source, std::span<const int> prefix, std::size_t interval) {
    NoGradGuard guard;
    const auto in = inference_input(framework, source, prefix, interval);
    Tensor<float> hidden;
    if (is_encoder_decoder(framework)) {
        auto enc = encode(model, ModelInput::single(*in.layout.encoder, in.encoder_tokens, *in.mask.encoder));
        auto dec = ModelInput::single(in.layout.sequence, in.tokens, in.mask.self);
        dec.cross_masks.push_back(*in.mask.cross);
        hidden = hidden_states(model, dec, &enc);
    } else {
        hidden = hidden_states(model, ModelInput::single(in.layout.sequence, in.tokens, in.mask.self));
    }
    const std::size_t row = in.read_position;
    auto logits = output_logits(model, gather_rows(hidden, std::span<const std::size_t>(&row, 1)));
    std::vector<float> out(logits.numel());
    kernels::log_softmax_row(logits.ptr(), out.data(), out.size());
    return out;
}

/// Scorer that rebuilds the whole input every step.
class ReferenceScorer {
  public:
    struct State {
        std::vector<int> prefix;
    };

    ReferenceScorer(const TransformerModel<float>& model, Framework framework, std::span<const int> source,
                    std::size_t interval)
        : model_(model), framework_(framework), source_(source), interval_(interval) {}

    State start() { return {}; }
    std::vector<float> log_probs(const State& s) { return step_scores(model_, framework_, source_, s.prefix, interval_); }
    State advance(const State& s, int token, std::size_t) {
        State n = s;
        n.prefix.push_back(token);
        return n;
    }
    bool fits(std::size_t t) const { return CachedScorer::step_fits(framework_, source_.size(), t); }

  private:
    const TransformerModel<float>& model_;
    Framework framework_;
    std::span<const int> source_;
    std::size_t interval_;
};

inline DecodeResult beam_search(const TransformerModel<float>& model, Framework framework, std::span<const int> source,
                                const DecodeParams& params, const StepTrace& trace = {}) {
    IncrementalModel im(model, framework, params.interval);
    CachedScorer scorer(im, source);
    return beam_core(scorer, params, trace);
}

inline DecodeResult reference_decode(const TransformerModel<float>& model, Framework framework,
                                     std::span<const int> source, const DecodeParams& params,
                                     const StepTrace& trace = {}) {
    if (model.encoder_decoder != is_encoder_decoder(framework))
        throw std::invalid_argument("model architecture does not match framework " + std::string(to_string(framework)));
    ReferenceScorer scorer(model, framework, source, params.interval);
    return beam_core(scorer, params, trace);
}

}  // namespace tlab
