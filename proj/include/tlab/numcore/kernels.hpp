#pragma once

// Dense row-major kernels shared by the autograd ops and the incremental
// decoder. Every kernel fixes the accumulation order of each output element
// independently of how many rows are processed at once, so computing one row
// in isolation gives the same bits as computing it inside a full matrix.
// (The build disables implicit contraction for the same reason; fused
// multiply-adds happen only where a kernel asks for them.)

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace tlab::kernels {

/// Additive score for a forbidden attention cell.
template <typename T>
inline constexpr T forbid_value = T(-1e9);

/// acc + x * y, fused when the target has FMA. Every kernel goes through
/// this, so batched and single-row paths round identically.
template <typename T>
inline T madd(T x, T y, T acc) {
#if defined(__FMA__)
    return std::fma(x, y, acc);
#else
    return x * y + acc;
#endif
}

/// c[m,n] = a[m,k] * b[k,n] (+ bias[n]).
template <typename T>
void gemm(const T* a, const T* b, const T* bias, T* c, std::size_t m, std::size_t k, std::size_t n) {
    constexpr std::size_t kRows = 8;
    constexpr std::size_t kCols = 32;
    std::size_t i = 0;
    for (; i + kRows <= m; i += kRows) {
        std::size_t j0 = 0;
        for (; j0 + kCols <= n; j0 += kCols) {
            T acc[kRows][kCols];
            for (std::size_t r = 0; r < kRows; ++r)
                for (std::size_t j = 0; j < kCols; ++j) acc[r][j] = bias ? bias[j0 + j] : T(0);
            for (std::size_t p = 0; p < k; ++p) {
                const T* brow = b + p * n + j0;
                for (std::size_t r = 0; r < kRows; ++r) {
                    const T av = a[(i + r) * k + p];
                    for (std::size_t j = 0; j < kCols; ++j) acc[r][j] = madd(av, brow[j], acc[r][j]);
                }
            }
            for (std::size_t r = 0; r < kRows; ++r)
                std::copy(acc[r], acc[r] + kCols, c + (i + r) * n + j0);
        }
        if (j0 < n) {
            for (std::size_t r = 0; r < kRows; ++r) {
                T* crow = c + (i + r) * n;
                for (std::size_t j = j0; j < n; ++j) crow[j] = bias ? bias[j] : T(0);
                for (std::size_t p = 0; p < k; ++p) {
                    const T av = a[(i + r) * k + p];
                    const T* brow = b + p * n;
                    for (std::size_t j = j0; j < n; ++j) crow[j] = madd(av, brow[j], crow[j]);
                }
            }
        }
    }
    for (; i < m; ++i) {
        T* crow = c + i * n;
        for (std::size_t j = 0; j < n; ++j) crow[j] = bias ? bias[j] : T(0);
        for (std::size_t p = 0; p < k; ++p) {
            const T av = a[i * k + p];
            const T* brow = b + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] = madd(av, brow[j], crow[j]);
        }
    }
}

/// out[k,n] += a[m,k]^T * g[m,n]; each element sums over i in ascending order.
template <typename T>
void gemm_at_acc(const T* a, const T* g, T* out, std::size_t m, std::size_t k, std::size_t n) {
    constexpr std::size_t kRows = 8;
    constexpr std::size_t kCols = 32;
    std::size_t p0 = 0;
    for (; p0 + kRows <= k; p0 += kRows) {
        std::size_t j0 = 0;
        for (; j0 + kCols <= n; j0 += kCols) {
            T acc[kRows][kCols];
            for (std::size_t r = 0; r < kRows; ++r)
                for (std::size_t j = 0; j < kCols; ++j) acc[r][j] = out[(p0 + r) * n + j0 + j];
            for (std::size_t i = 0; i < m; ++i) {
                const T* grow = g + i * n + j0;
                const T* arow = a + i * k + p0;
                for (std::size_t r = 0; r < kRows; ++r) {
                    const T av = arow[r];
                    for (std::size_t j = 0; j < kCols; ++j) acc[r][j] = madd(av, grow[j], acc[r][j]);
                }
            }
            for (std::size_t r = 0; r < kRows; ++r)
                std::copy(acc[r], acc[r] + kCols, out + (p0 + r) * n + j0);
        }
        for (std::size_t i = 0; i < m && j0 < n; ++i)
            for (std::size_t r = 0; r < kRows; ++r) {
                const T av = a[i * k + p0 + r];
                T* orow = out + (p0 + r) * n;
                for (std::size_t j = j0; j < n; ++j) orow[j] = madd(av, g[i * n + j], orow[j]);
            }
    }
    for (std::size_t i = 0; i < m && p0 < k; ++i) {
        const T* grow = g + i * n;
        for (std::size_t p = p0; p < k; ++p) {
            const T av = a[i * k + p];
            T* orow = out + p * n;
            for (std::size_t j = 0; j < n; ++j) orow[j] = madd(av, grow[j], orow[j]);
        }
    }
}

template <typename T>
std::vector<T> transpose(const T* src, std::size_t rows, std::size_t cols) {
    std::vector<T> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) out[j * rows + i] = src[i * cols + j];
    return out;
}

/// Normalizes `x` in place of `out`; returns (mean, reciprocal std).
template <typename T>
std::pair<T, T> layer_norm_row(const T* x, const T* gamma, const T* beta, T eps, T* out, std::size_t n) {
    T mean = 0;
    for (std::size_t j = 0; j < n; ++j) mean += x[j];
    mean /= static_cast<T>(n);
    T var = 0;
    for (std::size_t j = 0; j < n; ++j) {
        const T d = x[j] - mean;
        var += d * d;
    }
    var /= static_cast<T>(n);
    const T rstd = T(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < n; ++j) out[j] = gamma[j] * ((x[j] - mean) * rstd) + beta[j];
    return {mean, rstd};
}

// tanh approximation, as in GPT-2.
template <typename T>
inline T gelu(T x) {
    constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
    const T u = c * (x + T(0.044715) * x * x * x);
    return T(0.5) * x * (T(1) + std::tanh(u));
}

template <typename T>
inline T gelu_grad(T x) {
    constexpr T c = T(0.7978845608028654);
    const T x2 = x * x;
    const T u = c * (x + T(0.044715) * x2 * x);
    const T th = std::tanh(u);
    const T du = c * (T(1) + T(3) * T(0.044715) * x2);
    return T(0.5) * (T(1) + th) + T(0.5) * x * (T(1) - th * th) * du;
}

/// Softmax of `scores` with forbidden cells pushed to `forbid_value` before
/// normalization and forced to exactly zero afterwards.
template <typename T>
void masked_softmax_row(const T* scores, const std::uint8_t* allow, T* out, std::size_t n) {
    T max = -std::numeric_limits<T>::infinity();
    bool any = false;
    for (std::size_t j = 0; j < n; ++j) {
        const T s = allow[j] ? scores[j] : scores[j] + forbid_value<T>;
        out[j] = s;
        any = any || allow[j];
        max = std::max(max, s);
    }
    if (!any) throw std::invalid_argument("empty attention row");
    T sum = 0;
    for (std::size_t j = 0; j < n; ++j) {
        out[j] = std::exp(out[j] - max);
        sum += out[j];
    }
    for (std::size_t j = 0; j < n; ++j) out[j] = allow[j] ? out[j] / sum : T(0);
}

/// One attention head for one query row.
///   q: [dk]; keys/values: `cols` rows with stride `stride`, head slice
///   already offset; probs: [cols] scratch that receives the weights;
///   out: [dk].
template <typename T>
void attention_row(const T* q, const T* keys, const T* values, std::size_t stride, std::size_t cols,
                   std::size_t dk, const std::uint8_t* allow, T scale, T* probs, T* out) {
    for (std::size_t j = 0; j < cols; ++j) {
        if (!allow[j]) {
            probs[j] = 0;
            continue;
        }
        const T* kr = keys + j * stride;
        T s = 0;
        for (std::size_t e = 0; e < dk; ++e) s = madd(q[e], kr[e], s);
        probs[j] = s * scale;
    }
    masked_softmax_row(probs, allow, probs, cols);
    std::fill(out, out + dk, T(0));
    for (std::size_t j = 0; j < cols; ++j) {
        if (!allow[j]) continue;
        const T p = probs[j];
        const T* vr = values + j * stride;
        for (std::size_t e = 0; e < dk; ++e) out[e] = madd(p, vr[e], out[e]);
    }
}

/// log-softmax of one row.
template <typename T>
void log_softmax_row(const T* x, T* out, std::size_t n) {
    T max = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < n; ++j) max = std::max(max, x[j]);
    T sum = 0;
    for (std::size_t j = 0; j < n; ++j) sum += std::exp(x[j] - max);
    const T lse = max + std::log(sum);
    for (std::size_t j = 0; j < n; ++j) out[j] = x[j] - lse;
}

}  // namespace tlab::kernels
