#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "tlab/data/corpus.hpp"
#include "tlab/data/vocab.hpp"
#include "tlab/numcore/rng.hpp"

namespace tlab {

enum class SynthTask { Echo, Reverse, TemplatedQa, GrammarLm };

inline std::string_view to_string(SynthTask t) {
    switch (t) {
        case SynthTask::Echo: return "echo";
        case SynthTask::Reverse: return "reverse";
        case SynthTask::TemplatedQa: return "templated-qa";
        case SynthTask::GrammarLm: return "grammar-lm";
    }
    return "?";
}

inline SynthTask parse_task(std::string_view s) {
    for (auto t : {SynthTask::Echo, SynthTask::Reverse, SynthTask::TemplatedQa, SynthTask::GrammarLm})
        if (to_string(t) == s) return t;
    throw std::invalid_argument("unknown task '" + std::string(s) + "' (expected echo, reverse, templated-qa, grammar-lm)");
}

/// One production. Lexical rules carry a word list and choose uniformly.
struct GrammarRule {
    std::string lhs;
    std::vector<std::string> rhs;
    double weight = 1.0;
    std::vector<std::string> words;
};

/// Small English-like probabilistic grammar: 18 phrase rules and 12 lexical
/// classes over a 54-word lexicon.
inline const std::vector<GrammarRule>& toy_grammar() {
    static const std::vector<GrammarRule> rules = {
        {"S", {"NP", "VP"}, 0.60, {}},
        {"S", {"NP", "VP", "PP"}, 0.15, {}},
        {"S", {"Adv", "NP", "VP"}, 0.10, {}},
        {"S", {"NP", "VP", "Conj", "NP", "VP"}, 0.15, {}},
        {"NP", {"Det", "N"}, 0.35, {}},
        {"NP", {"Det", "Adj", "N"}, 0.20, {}},
        {"NP", {"Det", "Adj", "Adj", "N"}, 0.05, {}},
        {"NP", {"Pron"}, 0.15, {}},
        {"NP", {"Name"}, 0.15, {}},
        {"NP", {"Num", "N"}, 0.10, {}},
        {"VP", {"Vt", "NP"}, 0.30, {}},
        {"VP", {"Vi"}, 0.20, {}},
        {"VP", {"Vi", "Adv"}, 0.10, {}},
        {"VP", {"Vt", "NP", "Adv"}, 0.10, {}},
        {"VP", {"Aux", "Vi"}, 0.10, {}},
        {"VP", {"Vi", "PP"}, 0.10, {}},
        {"VP", {"Vt", "NP", "PP"}, 0.10, {}},
        {"PP", {"P", "NP"}, 1.00, {}},
        {"Det", {}, 1.0, {"the", "a", "this", "every"}},
        {"N", {}, 1.0, {"dog", "cat", "bird", "man", "woman", "child", "ball", "tree", "house", "book", "car", "fish"}},
        {"Adj", {}, 1.0, {"big", "small", "red", "old", "happy", "quiet"}},
        {"Pron", {}, 1.0, {"he", "she", "it", "they"}},
        {"Name", {}, 1.0, {"anna", "bob", "carl", "dana"}},
        {"Num", {}, 1.0, {"two", "three"}},
        {"Vt", {}, 1.0, {"sees", "likes", "takes", "finds", "holds"}},
        {"Vi", {}, 1.0, {"runs", "sleeps", "sings", "waits", "falls"}},
        {"Adv", {}, 1.0, {"now", "often", "slowly", "today"}},
        {"Aux", {}, 1.0, {"can", "will"}},
        {"P", {}, 1.0, {"in", "on", "near", "under"}},
        {"Conj", {}, 1.0, {"and", "but"}},
    };
    return rules;
}

namespace detail {

inline void expand(const std::string& symbol, Rng& rng, std::vector<std::string>& out) {
    const auto& rules = toy_grammar();
    std::vector<const GrammarRule*> options;
    std::vector<double> weights;
    for (const auto& r : rules)
        if (r.lhs == symbol) {
            options.push_back(&r);
            weights.push_back(r.weight);
        }
    if (options.empty()) throw std::logic_error("grammar has no rule for " + symbol);
    const auto* rule = options[std::discrete_distribution<std::size_t>(weights.begin(), weights.end())(rng)];
    if (!rule->words.empty()) {
        out.push_back(rule->words[uniform_index(rng, rule->words.size())]);
        return;
    }
    for (const auto& s : rule->rhs) expand(s, rng, out);
}

inline bool has_repeat(const std::vector<std::string>& words) {
    return std::set<std::string>(words.begin(), words.end()).size() != words.size();
}

}  // namespace detail

inline std::vector<std::string> grammar_sentence(Rng& rng) {
    std::vector<std::string> out;
    detail::expand("S", rng, out);
    return out;
}

/// Grammar sentence with length in [lo, hi], optionally without repeated words.
inline std::vector<std::string> bounded_sentence(Rng& rng, std::size_t lo, std::size_t hi, bool distinct) {
    for (;;) {
        auto s = grammar_sentence(rng);
        if (s.size() < lo || s.size() > hi) continue;
        if (distinct && detail::has_repeat(s)) continue;
        return s;
    }
}

struct SynthOptions {
    std::size_t min_words = 3;
    std::size_t max_words = 8;
    std::size_t max_turns = 1;  ///< history turns for echo/reverse
};

/// Deterministic synthetic corpus:
///   echo:         response = last history turn
///   reverse:      response = last history turn reversed word-wise
///   templated-qa: "what is X plus Y" -> "X plus Y is Z", X, Y in [0, 20]
///   grammar-lm:   two consecutive grammar sentences (pretraining text)
inline std::vector<DialogueSample> synth_generate(SynthTask task, std::size_t size, std::uint64_t seed,
                                                  const SynthOptions& options = {}) {
    if (size == 0) throw std::invalid_argument("synth_generate: size must be at least 1");
    if (options.min_words == 0 || options.min_words > options.max_words || options.max_turns == 0)
        throw std::invalid_argument("synth_generate: invalid length options");
    Rng rng = make_rng(seed);
    std::vector<DialogueSample> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
        DialogueSample s;
        switch (task) {
            case SynthTask::Echo:
            case SynthTask::Reverse: {
                const std::size_t turns = 1 + uniform_index(rng, options.max_turns);
                for (std::size_t t = 0; t < turns; ++t)
                    s.history.push_back(
                        join_words(bounded_sentence(rng, options.min_words, options.max_words, task == SynthTask::Reverse)));
                auto last = split_words(s.history.back());
                if (task == SynthTask::Reverse) std::reverse(last.begin(), last.end());
                s.response = join_words(last);
                break;
            }
            case SynthTask::TemplatedQa: {
                const int x = static_cast<int>(uniform_index(rng, 21));
                const int y = static_cast<int>(uniform_index(rng, 21));
                s.history.push_back("what is " + std::to_string(x) + " plus " + std::to_string(y));
                s.response = std::to_string(x) + " plus " + std::to_string(y) + " is " + std::to_string(x + y);
                break;
            }
            case SynthTask::GrammarLm: {
                s.history.push_back(join_words(bounded_sentence(rng, 2, 16, false)));
                s.response = join_words(bounded_sentence(rng, 2, 16, false));
                break;
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace tlab
