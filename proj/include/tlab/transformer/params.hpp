#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "tlab/numcore/adam.hpp"
#include "tlab/numcore/tensor.hpp"
#include "tlab/transformer/config.hpp"

namespace tlab {

/// Named weight tensors of one model, iterated in name order.
template <typename T>
class ParameterSet {
  public:
    ParameterSet() = default;
    explicit ParameterSet(NamedTensors<T> tensors) : tensors_(std::move(tensors)) {}

    bool contains(const std::string& name) const { return tensors_.count(name) != 0; }

    const Tensor<T>& get(const std::string& name) const {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) throw std::out_of_range("missing parameter '" + name + "'");
        return it->second;
    }
    Tensor<T>& get(const std::string& name) {
        auto it = tensors_.find(name);
        if (it == tensors_.end()) throw std::out_of_range("missing parameter '" + name + "'");
        return it->second;
    }

    void set(const std::string& name, Tensor<T> t) { tensors_[name] = std::move(t); }
    void erase(const std::string& name) { tensors_.erase(name); }

    NamedTensors<T>& tensors() { return tensors_; }
    const NamedTensors<T>& tensors() const { return tensors_; }
    std::size_t size() const { return tensors_.size(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& [_, t] : tensors_) n += t.numel();
        return n;
    }

    std::vector<Tensor<T>> list() const {
        std::vector<Tensor<T>> out;
        for (const auto& [_, t] : tensors_) out.push_back(t);
        return out;
    }

    ParameterSet clone() const {
        NamedTensors<T> copy;
        for (const auto& [name, t] : tensors_) copy.emplace(name, t.clone());
        return ParameterSet(std::move(copy));
    }

    template <typename U>
    ParameterSet<U> cast() const {
        NamedTensors<U> copy;
        for (const auto& [name, t] : tensors_) copy.emplace(name, t.template cast<U>());
        return ParameterSet<U>(std::move(copy));
    }

    void set_requires_grad(bool flag) {
        for (auto& [_, t] : tensors_) t.set_requires_grad(flag);
    }
    void zero_grad() {
        for (auto& [_, t] : tensors_) t.zero_grad();
    }

    /// Same names, shapes and bit-identical values.
    bool equals(const ParameterSet& other) const {
        if (tensors_.size() != other.tensors_.size()) return false;
        for (const auto& [name, t] : tensors_) {
            auto it = other.tensors_.find(name);
            if (it == other.tensors_.end() || it->second.shape() != t.shape()) return false;
            const auto a = t.data();
            const auto b = it->second.data();
            if (!std::equal(a.begin(), a.end(), b.begin())) return false;
        }
        return true;
    }

  private:
    NamedTensors<T> tensors_;
};

enum class ParamRole { Weight, Bias, Gain, Embedding };

struct ParamSpec {
    std::string name;
    Shape shape;
    ParamRole role;
};

namespace detail {

inline void append_attention(std::vector<ParamSpec>& out, const std::string& p, std::size_t d) {
    for (const char* w : {"wq", "wk", "wv", "wo"}) {
        out.push_back({p + w, {d, d}, ParamRole::Weight});
        out.push_back({p + "b" + std::string(w + 1), {d}, ParamRole::Bias});
    }
}

inline void append_norm(std::vector<ParamSpec>& out, const std::string& p, std::size_t d) {
    out.push_back({p + "gain", {d}, ParamRole::Gain});
    out.push_back({p + "bias", {d}, ParamRole::Bias});
}

inline void append_stack(std::vector<ParamSpec>& out, const std::string& prefix, const ModelConfig& c, bool cross) {
    const std::size_t d = c.hidden, f = c.ffn_hidden();
    for (std::size_t l = 0; l < c.layers; ++l) {
        const std::string p = prefix + "layer" + std::to_string(l) + ".";
        append_norm(out, p + "ln1.", d);
        append_attention(out, p + "attn.", d);
        if (cross) {
            append_norm(out, p + "lnx.", d);
            append_attention(out, p + "xattn.", d);
        }
        append_norm(out, p + "ln2.", d);
        out.push_back({p + "ffn.w1", {d, f}, ParamRole::Weight});
        out.push_back({p + "ffn.b1", {f}, ParamRole::Bias});
        out.push_back({p + "ffn.w2", {f, d}, ParamRole::Weight});
        out.push_back({p + "ffn.b2", {d}, ParamRole::Bias});
    }
    append_norm(out, prefix + "ln_f.", d);
}

}  // namespace detail

/// Every parameter of a decoder-only (or, with `encoder_decoder`, an
/// encoder plus cross-attending decoder) model. Embedding tables are shared
/// by both stacks.
inline std::vector<ParamSpec> parameter_specs(const ModelConfig& c, bool encoder_decoder) {
    std::vector<ParamSpec> out;
    out.push_back({"emb.token", {c.vocab_size, c.hidden}, ParamRole::Embedding});
    out.push_back({"emb.position", {c.max_positions, c.hidden}, ParamRole::Embedding});
    out.push_back({"emb.type", {c.type_count, c.hidden}, ParamRole::Embedding});
    if (encoder_decoder) {
        detail::append_stack(out, "enc.", c, false);
        detail::append_stack(out, "dec.", c, true);
    } else {
        detail::append_stack(out, "", c, false);
    }
    if (!c.tie_output_embedding) {
        out.push_back({"head.weight", {c.hidden, c.vocab_size}, ParamRole::Weight});
        out.push_back({"head.bias", {c.vocab_size}, ParamRole::Bias});
    }
    return out;
}

}  // namespace tlab
