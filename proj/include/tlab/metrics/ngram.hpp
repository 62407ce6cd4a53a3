#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace tlab {

using Sentence = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

inline NgramCounts ngram_counts(const Sentence& s, std::size_t n) {
    NgramCounts out;
    if (n == 0 || s.size() < n) return out;
    for (std::size_t i = 0; i + n <= s.size(); ++i) ++out[std::vector<std::string>(s.begin() + i, s.begin() + i + n)];
    return out;
}

inline std::size_t ngram_total(const Sentence& s, std::size_t n) { return s.size() >= n && n > 0 ? s.size() - n + 1 : 0; }

}  // namespace tlab
