#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace tlab {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace detail {

inline bool& grad_mode_flag() {
    thread_local bool enabled = true;
    return enabled;
}

template <typename T>
struct TensorNode {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backward_fn;

    bool is_leaf() const { return !backward_fn; }

    std::vector<T>& ensure_grad() {
        if (grad.size() != data.size()) grad.assign(data.size(), T(0));
        return grad;
    }
};

}  // namespace detail

inline bool grad_enabled() { return detail::grad_mode_flag(); }

/// Disables graph recording on this thread for its lifetime.
class NoGradGuard {
  public:
    NoGradGuard() : previous_(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
    ~NoGradGuard() { detail::grad_mode_flag() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

  private:
    bool previous_;
};

/// Row-major dense tensor with an optional gradient accumulator. Copies are
/// shallow handles onto the same storage; use clone() for a deep copy.
template <typename T>
class Tensor {
  public:
    using Node = detail::TensorNode<T>;
    using value_type = T;

    Tensor() = default;

    static Tensor zeros(Shape shape) {
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->data.assign(shape_numel(shape), T(0));
        t.node_->shape = std::move(shape);
        return t;
    }

    static Tensor from_data(Shape shape, std::vector<T> data) {
        if (shape_numel(shape) != data.size())
            throw std::invalid_argument("tensor data size " + std::to_string(data.size()) +
                                        " does not match shape " + shape_string(shape));
        Tensor t;
        t.node_ = std::make_shared<Node>();
        t.node_->shape = std::move(shape);
        t.node_->data = std::move(data);
        return t;
    }

    static Tensor scalar(T value) { return from_data({1}, {value}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t numel() const { return node_->data.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t rows() const { return node_->shape.empty() ? 1 : node_->shape.front(); }
    std::size_t cols() const { return rows() == 0 ? 0 : numel() / rows(); }

    std::span<T> data() { return node_->data; }
    std::span<const T> data() const { return node_->data; }
    T* ptr() { return node_->data.data(); }
    const T* ptr() const { return node_->data.data(); }

    T item() const {
        if (numel() != 1) throw std::logic_error("item() on tensor of shape " + shape_string(shape()));
        return node_->data[0];
    }
    T at(std::size_t i, std::size_t j) const { return node_->data[i * cols() + j]; }

    bool requires_grad() const { return node_->requires_grad; }
    Tensor& set_requires_grad(bool flag = true) {
        node_->requires_grad = flag;
        return *this;
    }

    bool has_grad() const { return node_->grad.size() == node_->data.size(); }
    /// Gradient accumulator (allocated zeroed on first access). Tensors are
    /// handles, so a const handle still exposes its node's accumulator.
    std::span<T> grad() const { return node_->ensure_grad(); }
    void zero_grad() {
        if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
    }

    /// Deep copy of data (gradient and graph history dropped).
    Tensor clone() const {
        Tensor t = from_data(shape(), node_->data);
        t.node_->requires_grad = node_->requires_grad;
        return t;
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(node_->data.begin(), node_->data.end());
        auto t = Tensor<U>::from_data(shape(), std::move(out));
        t.set_requires_grad(requires_grad());
        return t;
    }

    std::shared_ptr<Node> node() const { return node_; }
    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

  private:
    std::shared_ptr<Node> node_;
};

namespace detail {

/// Creates an op output. When recording is on and any input needs a
/// gradient, links the inputs and installs `backward`.
template <typename T>
Tensor<T> make_result(Shape shape, std::vector<T> data, std::initializer_list<Tensor<T>> inputs,
                      std::function<void(TensorNode<T>&)> backward) {
    auto out = Tensor<T>::from_data(std::move(shape), std::move(data));
    if (!grad_enabled()) return out;
    bool needs = false;
    for (const auto& in : inputs) needs = needs || (in.defined() && in.requires_grad());
    if (!needs) return out;
    auto node = out.node();
    node->requires_grad = true;
    for (const auto& in : inputs)
        if (in.defined() && in.requires_grad()) node->parents.push_back(in.node());
    node->backward_fn = std::move(backward);
    return out;
}

template <typename T>
bool wants_grad(const Tensor<T>& t) {
    return t.defined() && t.requires_grad();
}

}  // namespace detail

/// Reverse-mode sweep from a scalar. Leaf gradients accumulate across calls;
/// interior gradients are reset on every call.
template <typename T>
void backward(const Tensor<T>& loss) {
    if (loss.numel() != 1)
        throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_string(loss.shape()));
    if (!loss.requires_grad()) return;

    using Node = detail::TensorNode<T>;
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
    seen.insert(loss.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* parent = node->parents[next++].get();
            if (seen.insert(parent).second) stack.emplace_back(parent, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (Node* n : order)
        if (!n->is_leaf()) n->grad.assign(n->data.size(), T(0));
    loss.node()->ensure_grad()[0] += T(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it)
        if (!(*it)->is_leaf()) (*it)->backward_fn(**it);
}

}  // namespace tlab
