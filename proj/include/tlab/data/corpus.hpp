#pragma once

#include <cstddef>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/data/vocab.hpp"
#include "tlab/layout/layout.hpp"

namespace tlab {

struct DialogueSample {
    std::vector<std::string> history;  ///< turns, oldest first
    std::string response;

    /// Turns joined by " [SEP] ".
    std::string source_text() const {
        std::string out;
        for (std::size_t i = 0; i < history.size(); ++i) {
            if (i) out += " [SEP] ";
            out += history[i];
        }
        return out;
    }

    friend bool operator==(const DialogueSample&, const DialogueSample&) = default;
};

struct LengthLimits {
    std::size_t max_history = 72;
    std::size_t min_response = 1;
    std::size_t max_response = 36;
};

struct CorpusStats {
    std::size_t lines = 0;
    std::size_t malformed = 0;     ///< wrong field count or empty field
    std::size_t out_of_bounds = 0; ///< violates the length limits
};

inline std::vector<std::string> split_turns(const std::string& history) {
    std::vector<std::string> turns;
    std::vector<std::string> current;
    for (auto& w : split_words(history)) {
        if (Vocab::special_id(w) == special::kSep) {
            turns.push_back(join_words(current));
            current.clear();
        } else {
            current.push_back(w);
        }
    }
    turns.push_back(join_words(current));
    return turns;
}

/// Source token count (turn words plus separators).
inline std::size_t source_length(const DialogueSample& s) {
    std::size_t n = s.history.empty() ? 0 : s.history.size() - 1;
    for (const auto& t : s.history) n += split_words(t).size();
    return n;
}

inline std::size_t response_length(const DialogueSample& s) { return split_words(s.response).size(); }

/// True when the sample fits the limits and its widest layout (mask stream
/// with a terminal slot, S + 2R + 1) stays within the input budget.
inline bool within_limits(const DialogueSample& s, const LengthLimits& limits) {
    const std::size_t S = source_length(s), R = response_length(s);
    if (S == 0 || S > limits.max_history) return false;
    if (R < limits.min_response || R > limits.max_response) return false;
    return S + 2 * R + 1 <= kMaxInputLength;
}

/// Parses one "history TAB response" line; returns false if malformed.
inline bool parse_corpus_line(std::string line, DialogueSample& out) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) return false;
    const std::string history = line.substr(0, tab);
    const std::string response = line.substr(tab + 1);
    if (split_words(history).empty() || split_words(response).empty()) return false;
    out.history = split_turns(history);
    for (const auto& t : out.history)
        if (t.empty()) return false;
    out.response = join_words(split_words(response));
    return true;
}

struct LoadedCorpus {
    std::vector<DialogueSample> samples;
    CorpusStats stats;
};

/// Reads a corpus file, skipping (and counting) malformed and out-of-bound
/// lines. Blank lines are ignored.
inline LoadedCorpus load_corpus(const std::string& path, const LengthLimits& limits = {}, bool warn = true) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read corpus file " + path);
    LoadedCorpus out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        ++out.stats.lines;
        DialogueSample s;
        if (!parse_corpus_line(line, s)) {
            ++out.stats.malformed;
            continue;
        }
        if (!within_limits(s, limits)) {
            ++out.stats.out_of_bounds;
            continue;
        }
        out.samples.push_back(std::move(s));
    }
    if (warn && (out.stats.malformed || out.stats.out_of_bounds))
        std::cerr << "warning: " << path << ": skipped " << out.stats.malformed << " malformed and "
                  << out.stats.out_of_bounds << " out-of-bounds lines\n";
    if (out.samples.empty()) throw std::runtime_error("corpus " + path + " has no valid lines");
    return out;
}

inline void write_corpus(const std::string& path, const std::vector<DialogueSample>& samples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write corpus file " + path);
    for (const auto& s : samples) out << s.source_text() << '\t' << s.response << '\n';
    if (!out) throw std::runtime_error("failed writing corpus file " + path);
}

/// Every history and response text, for vocabulary building.
inline std::vector<std::string> corpus_texts(const std::vector<DialogueSample>& samples) {
    std::vector<std::string> out;
    for (const auto& s : samples) {
        for (const auto& t : s.history) out.push_back(t);
        out.push_back(s.response);
    }
    return out;
}

}  // namespace tlab
