#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tlab {

/// Boolean allow-matrix for attention: `allowed(i, j)` means query row i may
/// attend to key column j (additive 0 in the score matrix); a forbidden cell
/// is an additive -inf.
class AttentionMask {
  public:
    AttentionMask() = default;
    AttentionMask(std::size_t rows, std::size_t cols, bool fill = false)
        : rows_(rows), cols_(cols), cells_(rows * cols, fill ? 1 : 0) {}

    static AttentionMask square(std::size_t n, bool fill = false) { return AttentionMask(n, n, fill); }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    bool allowed(std::size_t i, std::size_t j) const { return cells_[i * cols_ + j] != 0; }
    void set(std::size_t i, std::size_t j, bool allow) { cells_[i * cols_ + j] = allow ? 1 : 0; }

    std::span<const std::uint8_t> row(std::size_t i) const {
        return std::span<const std::uint8_t>(cells_).subspan(i * cols_, cols_);
    }

    std::size_t row_count(std::size_t i) const {
        std::size_t c = 0;
        for (auto v : row(i)) c += v;
        return c;
    }

    /// Row-major 0/1 grid, one row per line.
    std::string to_text() const {
        std::string out;
        out.reserve(rows_ * (cols_ + 1));
        for (std::size_t i = 0; i < rows_; ++i) {
            for (std::size_t j = 0; j < cols_; ++j) out.push_back(allowed(i, j) ? '1' : '0');
            out.push_back('\n');
        }
        return out;
    }

    friend bool operator==(const AttentionMask&, const AttentionMask&) = default;

  private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> cells_;
};

/// Self-attention mask of a framework input; ED adds the encoder's own mask
/// and the decoder-to-encoder cross mask.
struct FrameworkMask {
    AttentionMask self;
    std::optional<AttentionMask> encoder;
    std::optional<AttentionMask> cross;

    friend bool operator==(const FrameworkMask&, const FrameworkMask&) = default;
};

}  // namespace tlab
