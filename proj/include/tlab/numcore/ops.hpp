#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "tlab/layout/attention_mask.hpp"
#include "tlab/numcore/kernels.hpp"
#include "tlab/numcore/tensor.hpp"

namespace tlab {

// ---------------------------------------------------------------------------
// Vector-level primitives

/// Softmax over `logits` restricted to the allowed entries; forbidden entries
/// come out as exactly 0.
template <typename T>
std::vector<T> masked_softmax(std::span<const T> logits, std::span<const bool> allow) {
    if (logits.size() != allow.size()) throw std::invalid_argument("masked_softmax: length mismatch");
    std::vector<std::uint8_t> row(allow.begin(), allow.end());
    std::vector<T> out(logits.size());
    kernels::masked_softmax_row(logits.data(), row.data(), out.data(), logits.size());
    return out;
}

/// -log softmax(logits)[target]
template <typename T>
T cross_entropy(std::span<const T> logits, std::size_t target) {
    if (target >= logits.size())
        throw std::out_of_range("cross_entropy: target " + std::to_string(target) + " outside vocab of " +
                                std::to_string(logits.size()));
    std::vector<T> lp(logits.size());
    kernels::log_softmax_row(logits.data(), lp.data(), logits.size());
    return -lp[target];
}

template <typename T>
void layer_norm(std::span<const T> x, std::span<const T> gamma, std::span<const T> beta, T eps, std::span<T> out) {
    if (x.size() != gamma.size() || x.size() != beta.size() || x.size() != out.size())
        throw std::invalid_argument("layer_norm: length mismatch");
    if (!(eps > T(0))) throw std::invalid_argument("layer_norm: eps must be positive");
    kernels::layer_norm_row(x.data(), gamma.data(), beta.data(), eps, out.data(), x.size());
}

// ---------------------------------------------------------------------------
// Differentiable tensor ops. Matrices are 2-D [rows, cols].

namespace detail {

inline void require(bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument(what);
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.shape() == b.shape(),
                    "add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return detail::make_result<T>(a.shape(), std::move(out), {a, b}, [a, b](detail::TensorNode<T>& self) mutable {
        for (auto* t : {&a, &b}) {
            if (!detail::wants_grad(*t)) continue;
            auto g = t->grad();
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    std::vector<T> out(a.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * factor;
    return detail::make_result<T>(a.shape(), std::move(out), {a}, [a, factor](detail::TensorNode<T>& self) mutable {
        auto g = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * factor;
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T s = 0;
    for (T v : a.data()) s += v;
    return detail::make_result<T>({1}, {s}, {a}, [a](detail::TensorNode<T>& self) mutable {
        auto g = a.grad();
        for (auto& v : g) v += self.grad[0];
    });
}

template <typename T>
Tensor<T> dot(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require(a.numel() == b.numel(), "dot: length mismatch");
    T s = 0;
    for (std::size_t i = 0; i < a.numel(); ++i) s += a.data()[i] * b.data()[i];
    return detail::make_result<T>({1}, {s}, {a, b}, [a, b](detail::TensorNode<T>& self) mutable {
        const T g = self.grad[0];
        if (detail::wants_grad(a)) {
            auto ga = a.grad();
            for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * b.data()[i];
        }
        if (detail::wants_grad(b)) {
            auto gb = b.grad();
            for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * a.data()[i];
        }
    });
}

/// x[r, in] * w[in, out] + bias[out]; `bias` may be undefined.
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias = {}) {
    const std::size_t r = x.rows(), in = x.cols();
    detail::require(w.rank() == 2 && w.dim(0) == in,
                    "linear: input " + shape_string(x.shape()) + " incompatible with weight " + shape_string(w.shape()));
    const std::size_t outn = w.dim(1);
    if (bias.defined()) detail::require(bias.numel() == outn, "linear: bias size mismatch");
    std::vector<T> out(r * outn);
    kernels::gemm(x.ptr(), w.ptr(), bias.defined() ? bias.ptr() : nullptr, out.data(), r, in, outn);
    return detail::make_result<T>({r, outn}, std::move(out), {x, w, bias},
                                  [x, w, bias, r, in, outn](detail::TensorNode<T>& self) mutable {
        const T* dy = self.grad.data();
        if (detail::wants_grad(x)) {
            auto wt = kernels::transpose(w.ptr(), in, outn);
            std::vector<T> dx(r * in);
            kernels::gemm(dy, wt.data(), static_cast<const T*>(nullptr), dx.data(), r, outn, in);
            auto gx = x.grad();
            for (std::size_t i = 0; i < dx.size(); ++i) gx[i] += dx[i];
        }
        if (detail::wants_grad(w)) kernels::gemm_at_acc(x.ptr(), dy, w.grad().data(), r, in, outn);
        if (detail::wants_grad(bias)) {
            auto gb = bias.grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < outn; ++j) gb[j] += dy[i * outn + j];
        }
    });
}

/// x[r, d] * table[v, d]^T -> [r, v]  (tied output projection)
template <typename T>
Tensor<T> matmul_bt(const Tensor<T>& x, const Tensor<T>& table) {
    const std::size_t r = x.rows(), d = x.cols();
    detail::require(table.rank() == 2 && table.dim(1) == d, "matmul_bt: inner dimension mismatch");
    const std::size_t v = table.dim(0);
    auto tt = kernels::transpose(table.ptr(), v, d);
    std::vector<T> out(r * v);
    kernels::gemm(x.ptr(), tt.data(), static_cast<const T*>(nullptr), out.data(), r, d, v);
    return detail::make_result<T>({r, v}, std::move(out), {x, table},
                                  [x, table, r, d, v](detail::TensorNode<T>& self) mutable {
        const T* dy = self.grad.data();
        if (detail::wants_grad(x)) {
            std::vector<T> dx(r * d);
            kernels::gemm(dy, table.ptr(), static_cast<const T*>(nullptr), dx.data(), r, v, d);
            auto gx = x.grad();
            for (std::size_t i = 0; i < dx.size(); ++i) gx[i] += dx[i];
        }
        if (detail::wants_grad(table)) kernels::gemm_at_acc(dy, x.ptr(), table.grad().data(), r, v, d);
    });
}

/// Rows of `table` selected by `ids`.
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, std::span<const int> ids) {
    const std::size_t v = table.rows(), d = table.cols();
    std::vector<T> out(ids.size() * d);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (ids[i] < 0 || static_cast<std::size_t>(ids[i]) >= v)
            throw std::out_of_range("unknown token id " + std::to_string(ids[i]) + " (table has " +
                                    std::to_string(v) + " rows)");
        std::copy_n(table.ptr() + static_cast<std::size_t>(ids[i]) * d, d, out.data() + i * d);
    }
    std::vector<int> idx(ids.begin(), ids.end());
    return detail::make_result<T>({ids.size(), d}, std::move(out), {table},
                                  [table, idx = std::move(idx), d](detail::TensorNode<T>& self) mutable {
        auto g = table.grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) g[static_cast<std::size_t>(idx[i]) * d + j] += self.grad[i * d + j];
    });
}

template <typename T>
Tensor<T> gather_rows(const Tensor<T>& x, std::span<const std::size_t> rows) {
    const std::size_t d = x.cols();
    std::vector<T> out(rows.size() * d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        detail::require(rows[i] < x.rows(), "gather_rows: row out of range");
        std::copy_n(x.ptr() + rows[i] * d, d, out.data() + i * d);
    }
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    return detail::make_result<T>({rows.size(), d}, std::move(out), {x},
                                  [x, idx = std::move(idx), d](detail::TensorNode<T>& self) mutable {
        auto g = x.grad();
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < d; ++j) g[idx[i] * d + j] += self.grad[i * d + j];
    });
}

/// Row-wise layer normalization over the feature dimension.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps = T(1e-5)) {
    const std::size_t r = x.rows(), d = x.cols();
    detail::require(gamma.numel() == d && beta.numel() == d, "layer_norm: parameter size mismatch");
    std::vector<T> out(r * d);
    std::vector<T> rstd(r), mean(r);
    for (std::size_t i = 0; i < r; ++i) {
        auto [m, s] = kernels::layer_norm_row(x.ptr() + i * d, gamma.ptr(), beta.ptr(), eps, out.data() + i * d, d);
        mean[i] = m;
        rstd[i] = s;
    }
    return detail::make_result<T>(x.shape(), std::move(out), {x, gamma, beta},
                                  [x, gamma, beta, r, d, mean = std::move(mean),
                                   rstd = std::move(rstd)](detail::TensorNode<T>& self) mutable {
        std::vector<T> xhat(d), dxhat(d);
        const bool gx = detail::wants_grad(x), gg = detail::wants_grad(gamma), gb = detail::wants_grad(beta);
        for (std::size_t i = 0; i < r; ++i) {
            const T* xr = x.ptr() + i * d;
            const T* dy = self.grad.data() + i * d;
            T mean_dxhat = 0, mean_dxhat_xhat = 0;
            for (std::size_t j = 0; j < d; ++j) {
                xhat[j] = (xr[j] - mean[i]) * rstd[i];
                dxhat[j] = dy[j] * gamma.ptr()[j];
                mean_dxhat += dxhat[j];
                mean_dxhat_xhat += dxhat[j] * xhat[j];
            }
            mean_dxhat /= static_cast<T>(d);
            mean_dxhat_xhat /= static_cast<T>(d);
            if (gx) {
                T* g = x.grad().data() + i * d;
                for (std::size_t j = 0; j < d; ++j) g[j] += rstd[i] * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
            }
            if (gg) {
                auto g = gamma.grad();
                for (std::size_t j = 0; j < d; ++j) g[j] += dy[j] * xhat[j];
            }
            if (gb) {
                auto g = beta.grad();
                for (std::size_t j = 0; j < d; ++j) g[j] += dy[j];
            }
        }
    });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    std::vector<T> out(x.numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = kernels::gelu(x.data()[i]);
    return detail::make_result<T>(x.shape(), std::move(out), {x}, [x](detail::TensorNode<T>& self) mutable {
        auto g = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * kernels::gelu_grad(x.data()[i]);
    });
}

/// Masked multi-head attention over a batch of `masks.size()` sequences.
/// q: [B*n, d], k/v: [B*m, d]; masks[b] is n x m. Heads split d evenly.
template <typename T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t heads,
                    std::span<const AttentionMask> masks) {
    const std::size_t batch = masks.size();
    detail::require(batch > 0, "attention: empty batch");
    const std::size_t d = q.cols();
    detail::require(heads > 0 && d % heads == 0, "attention: hidden size not divisible by head count");
    detail::require(k.cols() == d && v.cols() == d && k.rows() == v.rows(), "attention: q/k/v shape mismatch");
    const std::size_t n = masks[0].rows(), m = masks[0].cols();
    for (const auto& mk : masks) detail::require(mk.rows() == n && mk.cols() == m, "attention: ragged masks");
    detail::require(q.rows() == batch * n && k.rows() == batch * m,
                    "attention: mask dimension " + std::to_string(n) + "x" + std::to_string(m) +
                        " does not match inputs " + shape_string(q.shape()) + "/" + shape_string(k.shape()));
    const std::size_t dk = d / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dk));

    std::vector<T> out(batch * n * d);
    std::vector<T> probs(batch * heads * n * m);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t i = 0; i < n; ++i)
                kernels::attention_row(q.ptr() + (b * n + i) * d + h * dk, k.ptr() + b * m * d + h * dk,
                                       v.ptr() + b * m * d + h * dk, d, m, dk, masks[b].row(i).data(), scale,
                                       probs.data() + ((b * heads + h) * n + i) * m,
                                       out.data() + (b * n + i) * d + h * dk);

    std::vector<AttentionMask> mask_copy(masks.begin(), masks.end());
    return detail::make_result<T>({batch * n, d}, std::move(out), {q, k, v},
                                  [q, k, v, heads, batch, n, m, d, dk, scale, probs = std::move(probs),
                                   mask_copy = std::move(mask_copy)](detail::TensorNode<T>& self) mutable {
        const bool gq = detail::wants_grad(q), gk = detail::wants_grad(k), gv = detail::wants_grad(v);
        T* dq = gq ? q.grad().data() : nullptr;
        T* dkp = gk ? k.grad().data() : nullptr;
        T* dv = gv ? v.grad().data() : nullptr;
        std::vector<T> dp(m);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t h = 0; h < heads; ++h)
                for (std::size_t i = 0; i < n; ++i) {
                    const T* p = probs.data() + ((b * heads + h) * n + i) * m;
                    const T* dout = self.grad.data() + (b * n + i) * d + h * dk;
                    const T* qi = q.ptr() + (b * n + i) * d + h * dk;
                    const auto allow = mask_copy[b].row(i);
                    T pdp = 0;
                    for (std::size_t j = 0; j < m; ++j) {
                        if (!allow[j]) continue;
                        const std::size_t col = (b * m + j) * d + h * dk;
                        T s = 0;
                        for (std::size_t e = 0; e < dk; ++e) s += dout[e] * v.ptr()[col + e];
                        dp[j] = s;
                        pdp += p[j] * s;
                        if (gv)
                            for (std::size_t e = 0; e < dk; ++e) dv[col + e] += p[j] * dout[e];
                    }
                    for (std::size_t j = 0; j < m; ++j) {
                        if (!allow[j]) continue;
                        const T ds = p[j] * (dp[j] - pdp) * scale;
                        const std::size_t col = (b * m + j) * d + h * dk;
                        if (gq)
                            for (std::size_t e = 0; e < dk; ++e) dq[(b * n + i) * d + h * dk + e] += ds * k.ptr()[col + e];
                        if (gk)
                            for (std::size_t e = 0; e < dk; ++e) dkp[col + e] += ds * qi[e];
                    }
                }
    });
}

/// Mean cross-entropy of each logits row against its target id.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, std::span<const int> targets) {
    const std::size_t r = logits.rows(), v = logits.cols();
    detail::require(targets.size() == r, "cross_entropy: one target per row required");
    detail::require(r > 0, "cross_entropy: no rows");
    std::vector<T> logp(r * v);
    T total = 0;
    for (std::size_t i = 0; i < r; ++i) {
        if (targets[i] < 0 || static_cast<std::size_t>(targets[i]) >= v)
            throw std::out_of_range("cross_entropy: target " + std::to_string(targets[i]) + " outside vocab of " +
                                    std::to_string(v));
        kernels::log_softmax_row(logits.ptr() + i * v, logp.data() + i * v, v);
        total -= logp[i * v + static_cast<std::size_t>(targets[i])];
    }
    const T inv = T(1) / static_cast<T>(r);
    std::vector<int> tg(targets.begin(), targets.end());
    return detail::make_result<T>({1}, {total * inv}, {logits},
                                  [logits, logp = std::move(logp), tg = std::move(tg), r, v,
                                   inv](detail::TensorNode<T>& self) mutable {
        auto g = logits.grad();
        const T scale = self.grad[0] * inv;
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < v; ++j) g[i * v + j] += scale * std::exp(logp[i * v + j]);
            g[i * v + static_cast<std::size_t>(tg[i])] -= scale;
        }
    });
}

}  // namespace tlab
