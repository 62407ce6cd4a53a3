#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdio>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/data/vocab.hpp"
#include "tlab/metrics/bleu.hpp"
#include "tlab/metrics/cider.hpp"
#include "tlab/metrics/diversity.hpp"
#include "tlab/metrics/ttest.hpp"

namespace tlab {

inline const std::array<std::string, 7>& metric_columns() {
    static const std::array<std::string, 7> cols = {"BLEU-1", "BLEU-2", "BLEU-3", "CIDEr", "Dist-1", "Dist-2", "avgLen"};
    return cols;
}

struct MetricsReport {
    std::array<double, 7> values{};  ///< in metric_columns() order
    /// Per-sample scores for each column (sentence BLEU, CIDEr, sentence
    /// distinct, length).
    std::array<std::vector<double>, 7> samples;
    std::size_t sample_count = 0;

    double bleu1() const { return values[0]; }
    double bleu2() const { return values[1]; }
    double bleu3() const { return values[2]; }
    double cider() const { return values[3]; }
    double dist1() const { return values[4]; }
    double dist2() const { return values[5]; }
    double avg_len() const { return values[6]; }
};

inline std::vector<Sentence> metric_tokens(const std::vector<std::string>& lines) {
    std::vector<Sentence> out;
    out.reserve(lines.size());
    for (const auto& l : lines) out.push_back(split_words(l));
    return out;
}

inline MetricsReport evaluate(const std::vector<Sentence>& hyps, const std::vector<Sentence>& refs) {
    if (hyps.size() != refs.size())
        throw std::invalid_argument("evaluate: " + std::to_string(hyps.size()) + " hypotheses vs " +
                                    std::to_string(refs.size()) + " references");
    if (hyps.empty()) throw std::invalid_argument("evaluate: empty corpus");
    MetricsReport r;
    r.sample_count = hyps.size();
    for (std::size_t n = 1; n <= 3; ++n) r.values[n - 1] = bleu_n(hyps, refs, n);
    const auto cs = cider_scores(hyps, refs);
    double total = 0;
    for (double v : cs) total += v;
    r.values[3] = total / static_cast<double>(cs.size());
    r.values[4] = distinct_n(hyps, 1);
    r.values[5] = distinct_n(hyps, 2);
    r.values[6] = avg_len(hyps);
    for (std::size_t i = 0; i < hyps.size(); ++i) {
        for (std::size_t n = 1; n <= 3; ++n) r.samples[n - 1].push_back(sentence_bleu(hyps[i], refs[i], n));
        r.samples[4].push_back(sentence_distinct(hyps[i], 1));
        r.samples[5].push_back(sentence_distinct(hyps[i], 2));
        r.samples[6].push_back(static_cast<double>(hyps[i].size()));
    }
    r.samples[3] = cs;
    return r;
}

inline MetricsReport evaluate_text(const std::vector<std::string>& hyps, const std::vector<std::string>& refs) {
    return evaluate(metric_tokens(hyps), metric_tokens(refs));
}

namespace detail {

inline std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline int column_digits(std::size_t c) { return c == 4 || c == 5 ? 3 : 2; }

inline std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        width[c] = header[c].size();
        for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
    }
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c) os << "  ";
            if (c == 0)
                os << cells[c] << std::string(width[c] - cells[c].size(), ' ');
            else
                os << std::string(width[c] - cells[c].size(), ' ') << cells[c];
        }
        os << '\n';
    };
    line(header);
    for (const auto& r : rows) line(r);
    return os.str();
}

}  // namespace detail

/// Aligned plain-text table with one row.
inline std::string render_report(const MetricsReport& r, const std::string& name = "model") {
    std::vector<std::string> header{"name"}, row{name};
    for (std::size_t c = 0; c < 7; ++c) {
        header.push_back(metric_columns()[c]);
        row.push_back(detail::fixed(r.values[c], detail::column_digits(c)));
    }
    return detail::render_table(header, {row});
}

/// Machine-readable key=value lines.
inline std::string render_key_values(const MetricsReport& r) {
    static const std::array<const char*, 7> keys = {"bleu1", "bleu2", "bleu3", "cider", "dist1", "dist2", "avg_len"};
    std::ostringstream os;
    for (std::size_t c = 0; c < 7; ++c) os << keys[c] << '=' << detail::fixed(r.values[c], 6) << '\n';
    os << "samples=" << r.sample_count << '\n';
    return os.str();
}

struct NamedReport {
    std::string name;
    MetricsReport report;
};

/// Stars for every non-best cell of every column except avgLen: two-sided
/// t-test of the row's per-sample scores against the best row's.
inline std::vector<std::array<std::string, 7>> compare_stars(const std::vector<NamedReport>& rows) {
    std::vector<std::array<std::string, 7>> stars(rows.size());
    if (rows.size() < 2) return stars;
    for (std::size_t c = 0; c + 1 < 7; ++c) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].report.values[c] > rows[best].report.values[c]) best = i;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (i == best) continue;
            const auto& a = rows[i].report.samples[c];
            const auto& b = rows[best].report.samples[c];
            if (a.size() < 2 || b.size() < 2) continue;
            stars[i][c] = significance_stars(t_test(a, b, false).p);
        }
    }
    return stars;
}

/// Comparison table: one row per system, columns BLEU-1 .. avgLen, with
/// significance stars against the best system per column.
inline std::string render_compare(const std::vector<NamedReport>& rows) {
    const auto stars = compare_stars(rows);
    std::vector<std::string> header{"name"};
    for (const auto& c : metric_columns()) header.push_back(c);
    std::vector<std::vector<std::string>> cells;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        std::vector<std::string> row{rows[i].name};
        for (std::size_t c = 0; c < 7; ++c)
            row.push_back(detail::fixed(rows[i].report.values[c], detail::column_digits(c)) + stars[i][c]);
        cells.push_back(std::move(row));
    }
    return detail::render_table(header, cells);
}

}  // namespace tlab
