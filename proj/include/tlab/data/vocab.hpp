#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tlab {

namespace special {
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kSep = 4;
inline constexpr int kMask = 5;
inline constexpr int kCount = 6;
}  // namespace special

inline const std::vector<std::string>& special_tokens() {
    static const std::vector<std::string> names = {"[PAD]", "[UNK]", "[BOS]", "[EOS]", "[SEP]", "[MASK]"};
    return names;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

/// Lowercased whitespace tokens of `text`.
inline std::vector<std::string> split_words(std::string_view text) {
    std::vector<std::string> out;
    std::istringstream in{std::string(text)};
    std::string w;
    while (in >> w) out.push_back(to_lower(w));
    return out;
}

inline std::string join_words(const std::vector<std::string>& words) {
    std::string out;
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i) out.push_back(' ');
        out += words[i];
    }
    return out;
}

/// Token/id bijection with the six special tokens at fixed ids 0..5.
class Vocab {
  public:
    Vocab() {
        for (const auto& s : special_tokens()) add(s);
    }

    /// Builds ids from whitespace-tokenized texts: specials, then words by
    /// descending frequency, ties broken lexicographically. Words seen fewer
    /// than `min_freq` times are left out (they map to [UNK]).
    static Vocab build(const std::vector<std::string>& texts, std::size_t min_freq = 1) {
        if (texts.empty()) throw std::invalid_argument("build_vocab: empty corpus");
        std::map<std::string, std::size_t> counts;
        for (const auto& t : texts)
            for (auto& w : split_words(t))
                if (special_id(w) < 0) ++counts[w];
        std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
        std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
        Vocab v;
        for (const auto& [w, c] : ranked)
            if (c >= min_freq) v.add(w);
        return v;
    }

    static Vocab from_tokens(const std::vector<std::string>& tokens) {
        if (tokens.size() < special::kCount) throw std::invalid_argument("vocab: fewer entries than special tokens");
        for (int i = 0; i < special::kCount; ++i)
            if (special_id(tokens[static_cast<std::size_t>(i)]) != i)
                throw std::invalid_argument("vocab: special token " + special_tokens()[static_cast<std::size_t>(i)] +
                                            " not at id " + std::to_string(i));
        Vocab v;
        for (std::size_t i = special::kCount; i < tokens.size(); ++i) {
            if (v.index_.count(tokens[i])) throw std::invalid_argument("vocab: duplicate token '" + tokens[i] + "'");
            v.add(tokens[i]);
        }
        return v;
    }

    static Vocab load(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot read vocab file " + path);
        std::vector<std::string> tokens;
        std::string line;
        while (std::getline(in, line)) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) tokens.push_back(line);
        }
        return from_tokens(tokens);
    }

    /// One token per line in id order.
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write vocab file " + path);
        for (const auto& t : tokens_) out << t << '\n';
        if (!out) throw std::runtime_error("failed writing vocab file " + path);
    }

    std::size_t size() const { return tokens_.size(); }
    const std::vector<std::string>& tokens() const { return tokens_; }

    int id(std::string_view word) const {
        const int s = special_id(word);
        if (s >= 0) return s;
        auto it = index_.find(to_lower(word));
        return it == index_.end() ? special::kUnk : it->second;
    }

    const std::string& token(int id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
            throw std::out_of_range("token id " + std::to_string(id) + " outside vocab of " +
                                    std::to_string(tokens_.size()));
        return tokens_[static_cast<std::size_t>(id)];
    }

    bool contains(std::string_view word) const { return special_id(word) >= 0 || index_.count(to_lower(word)) != 0; }

    static bool is_special(int id) { return id >= 0 && id < special::kCount; }

    /// Id of a bracketed special token (case-insensitive), or -1.
    static int special_id(std::string_view word) {
        const std::string up = [&] {
            std::string s(word);
            std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
            return s;
        }();
        const auto& names = special_tokens();
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == up) return static_cast<int>(i);
        return -1;
    }

    friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

  private:
    void add(const std::string& w) {
        index_.emplace(w, static_cast<int>(tokens_.size()));
        tokens_.push_back(w);
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, int> index_;
};

inline Vocab build_vocab(const std::vector<std::string>& texts, std::size_t min_freq = 1) {
    return Vocab::build(texts, min_freq);
}

/// Lowercase whitespace split; unknown words become [UNK].
inline std::vector<int> tokenize(std::string_view text, const Vocab& vocab) {
    std::vector<int> ids;
    for (const auto& w : split_words(text)) ids.push_back(vocab.id(w));
    return ids;
}

inline std::string detokenize(const std::vector<int>& ids, const Vocab& vocab) {
    std::vector<std::string> words;
    words.reserve(ids.size());
    for (int id : ids) words.push_back(vocab.token(id));
    return join_words(words);
}

}  // namespace tlab
