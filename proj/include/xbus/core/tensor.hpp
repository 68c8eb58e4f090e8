// Copyright 2026 The XBusNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "xbus/core/errors.hpp"

namespace xbus {

using Shape = std::vector<std::size_t>;

inline std::size_t numel(const Shape& shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string to_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

namespace detail {

struct Node;
using BackwardFn = std::function<void(const Node&)>;

/// One vertex of the dynamic graph. `grad` stays empty until something
/// accumulates into it.
struct Node {
    Shape shape;
    std::vector<double> data;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    BackwardFn backward;
    std::string_view op = "leaf";

    std::span<double> grad_buffer()
    {
        if (grad.empty())
            grad.assign(data.size(), 0.0);
        return grad;
    }
};

inline bool& grad_mode()
{
    thread_local bool enabled = true;
    return enabled;
}

inline void check_finite(std::string_view op, std::span<const double> values)
{
    for (double v : values) {
        if (!std::isfinite(v))
            throw NumericError("non-finite value produced by " + std::string(op));
    }
}

} // namespace detail

inline bool grad_enabled() { return detail::grad_mode(); }

/// Disables graph recording for its lifetime (inference, frozen encoders).
class NoGradGuard {
public:
    NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
    ~NoGradGuard() { detail::grad_mode() = previous_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

/// Shared handle to a row-major array of doubles with optional gradient.
/// Copies share storage; ops never mutate their inputs.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>())
    {
        node_->data.assign(numel(shape), fill);
        node_->shape = std::move(shape);
        node_->requires_grad = requires_grad;
    }

    Tensor(Shape shape, std::vector<double> values, bool requires_grad = false)
      : node_(std::make_shared<detail::Node>())
    {
        if (values.size() != numel(shape))
            throw ShapeError("tensor of shape " + to_string(shape) + " given "
                             + std::to_string(values.size()) + " values");
        node_->shape = std::move(shape);
        node_->data = std::move(values);
        node_->requires_grad = requires_grad;
    }

    static Tensor scalar(double v, bool requires_grad = false)
    {
        return Tensor(Shape{}, std::vector<double>{v}, requires_grad);
    }

    bool defined() const { return node_ != nullptr; }

    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t size() const { return node_->data.size(); }

    /// Dimension `i`; negative values count from the back.
    std::size_t dim(int i) const
    {
        const int r = static_cast<int>(rank());
        const int k = i < 0 ? r + i : i;
        if (k < 0 || k >= r)
            throw ShapeError("dimension index " + std::to_string(i) + " out of range for "
                             + to_string(shape()));
        return node_->shape[static_cast<std::size_t>(k)];
    }

    std::span<const double> data() const { return node_->data; }

    /// Writable view, only for tensors that are not the output of a recorded op.
    std::span<double> mutable_data()
    {
        if (node_->backward)
            throw UsageError("cannot mutate the output of a recorded op");
        return node_->data;
    }

    double item() const
    {
        if (size() != 1)
            throw ShapeError("item() on tensor of shape " + to_string(shape()));
        return node_->data[0];
    }

    bool requires_grad() const { return node_ && node_->requires_grad; }

    Tensor& set_requires_grad(bool flag)
    {
        node_->requires_grad = flag;
        return *this;
    }

    bool has_grad() const { return !node_->grad.empty(); }

    /// Accumulated gradient; zeros when nothing has been accumulated.
    std::vector<double> grad() const
    {
        if (node_->grad.empty())
            return std::vector<double>(size(), 0.0);
        return node_->grad;
    }

    void zero_grad() { node_->grad.clear(); }

    /// Value copy cut from the graph.
    Tensor detach() const { return Tensor(shape(), node_->data); }

    detail::Node* node() const { return node_.get(); }
    const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

    bool same_storage(const Tensor& other) const { return node_ == other.node_; }

private:
    std::shared_ptr<detail::Node> node_;
};

namespace detail {

/// Wraps freshly computed values into a graph node. The backward closure is
/// kept only when recording is on and some input needs a gradient.
inline Tensor make_result(std::string_view op, Shape shape, std::vector<double> values,
                          const std::vector<Tensor>& inputs, BackwardFn backward)
{
    check_finite(op, values);
    Tensor out(std::move(shape), std::move(values));
    bool needs = false;
    if (grad_enabled()) {
        for (const auto& t : inputs)
            needs = needs || t.requires_grad();
    }
    if (needs) {
        Node* n = out.node();
        n->requires_grad = true;
        n->op = op;
        for (const auto& t : inputs)
            n->parents.push_back(t.node_ptr());
        n->backward = std::move(backward);
    }
    return out;
}

/// Gradient buffer of `t`, or an empty span when `t` does not need one.
inline std::span<double> grad_sink(const Tensor& t)
{
    if (!t.requires_grad())
        return {};
    return t.node()->grad_buffer();
}

} // namespace detail

/// Reverse-mode sweep from a scalar. Nodes are visited in reverse
/// topological order of a depth-first post-order, so the accumulation order
/// is fixed for a fixed graph. Closures are released afterwards; gradients of
/// intermediate nodes stay readable.
inline void backward(const Tensor& loss)
{
    if (!loss.defined() || loss.size() != 1)
        throw UsageError("backward() requires a scalar loss");
    if (!loss.requires_grad())
        throw UsageError("backward() on a tensor that does not require grad");

    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    stack.emplace_back(loss.node(), 0);
    visited.insert(loss.node());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            detail::Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second)
                stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    loss.node()->grad_buffer()[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* n = *it;
        if (n->grad.empty())
            continue;
        detail::check_finite(n->op, n->grad);
        if (n->backward)
            n->backward(*n);
    }
    for (detail::Node* n : order) {
        if (n->backward) {
            n->backward = nullptr;
            n->parents.clear();
        }
    }
}

} // namespace xbus
