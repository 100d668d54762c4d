#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "fuseg/ops.hpp"
#include "fuseg/tensor.hpp"

namespace fuseg {

/// Reverse-mode tape node. Each graph op produces a Node holding the forward
/// value and a closure that scatters this node's gradient into its parents.
struct Node {
    Tensor value;
    Tensor grad;  // allocated lazily, same shape as value
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.data.empty()) grad = Tensor(value.shape);
    }
};

using Var = std::shared_ptr<Node>;

inline bool& grad_mode() {
    static bool enabled = true;
    return enabled;
}

/// Disables tape recording in its scope (evaluation-time forward passes).
struct NoGradGuard {
    bool prev;
    NoGradGuard() : prev(grad_mode()) { grad_mode() = false; }
    ~NoGradGuard() { grad_mode() = prev; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline Var make_leaf(Tensor value, bool requires_grad) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    n->requires_grad = requires_grad && grad_mode();
    return n;
}

inline Var make_input(Tensor value) { return make_leaf(std::move(value), false); }

namespace detail {

inline Var make_op(Tensor value, std::vector<Var> parents,
                   std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->value = std::move(value);
    if (grad_mode()) {
        for (const auto& p : parents)
            if (p->requires_grad) n->requires_grad = true;
        if (n->requires_grad) {
            n->parents = std::move(parents);
            n->backprop = std::move(backprop);
        }
    }
    return n;
}

}  // namespace detail

inline Var conv2d(const Var& x, const Var& w, const Var& b, int stride, int dilation,
                  Padding pad) {
    Tensor out = conv2d(x->value, w->value, b->value, stride, dilation, pad);
    return detail::make_op(std::move(out), {x, w, b}, [x, w, b, stride, dilation, pad](Node& self) {
        Tensor* gx = nullptr;
        Tensor* gw = nullptr;
        Tensor* gb = nullptr;
        if (x->requires_grad) { x->ensure_grad(); gx = &x->grad; }
        if (w->requires_grad) { w->ensure_grad(); gw = &w->grad; }
        if (b->requires_grad) { b->ensure_grad(); gb = &b->grad; }
        conv2d_backward(x->value, w->value, stride, dilation, pad, self.grad, gx, gw, gb);
    });
}

inline Var relu(const Var& x) {
    return detail::make_op(relu(x->value), {x}, [x](Node& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        relu_backward(x->value, self.grad, x->grad);
    });
}

inline Var add(const Var& a, const Var& b) {
    return detail::make_op(add(a->value, b->value), {a, b}, [a, b](Node& self) {
        for (const auto& p : {a, b}) {
            if (!p->requires_grad) continue;
            p->ensure_grad();
            for (std::size_t i = 0; i < self.grad.data.size(); ++i)
                p->grad.data[i] += self.grad.data[i];
        }
    });
}

inline Var concat_channels(const Var& a, const Var& b) {
    return detail::make_op(concat_channels(a->value, b->value), {a, b}, [a, b](Node& self) {
        const std::size_t na = a->value.data.size();
        if (a->requires_grad) {
            a->ensure_grad();
            for (std::size_t i = 0; i < na; ++i) a->grad.data[i] += self.grad.data[i];
        }
        if (b->requires_grad) {
            b->ensure_grad();
            for (std::size_t i = 0; i < b->value.data.size(); ++i)
                b->grad.data[i] += self.grad.data[na + i];
        }
    });
}

inline Var bilinear_resize(const Var& x, int out_h, int out_w) {
    return detail::make_op(bilinear_resize(x->value, out_h, out_w), {x}, [x](Node& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        bilinear_resize_backward(x->value, self.grad, x->grad);
    });
}

inline Var avg_downsample(const Var& x, int factor) {
    return detail::make_op(avg_downsample(x->value, factor), {x}, [x, factor](Node& self) {
        if (!x->requires_grad) return;
        x->ensure_grad();
        avg_downsample_backward(x->value, factor, self.grad, x->grad);
    });
}

/// Scalar node holding the mean cross-entropy; backward injects the
/// precomputed (softmax - onehot)/count gradient scaled by the upstream value.
inline Var softmax_cross_entropy(const Var& logits, const LabelMap& labels, int ignore_id) {
    XentResult r = softmax_cross_entropy(logits->value, labels, ignore_id);
    Tensor loss({1}, std::vector<double>{r.loss});
    auto dlogits = std::make_shared<Tensor>(std::move(r.grad));
    return detail::make_op(std::move(loss), {logits}, [logits, dlogits](Node& self) {
        if (!logits->requires_grad) return;
        logits->ensure_grad();
        const double up = self.grad.data[0];
        for (std::size_t i = 0; i < dlogits->data.size(); ++i)
            logits->grad.data[i] += up * dlogits->data[i];
    });
}

/// total = sum_i weights[i] * scalars[i]; all operands must be 1-element nodes.
inline Var weighted_sum(const std::vector<Var>& scalars, const std::vector<double>& weights) {
    if (scalars.empty() || scalars.size() != weights.size())
        throw std::invalid_argument("weighted_sum: operand/weight count mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < scalars.size(); ++i) {
        if (scalars[i]->value.numel() != 1)
            throw std::invalid_argument("weighted_sum: operands must be scalars");
        total += weights[i] * scalars[i]->value.data[0];
    }
    Tensor out({1}, std::vector<double>{total});
    return detail::make_op(std::move(out), scalars, [scalars, weights](Node& self) {
        for (std::size_t i = 0; i < scalars.size(); ++i) {
            if (!scalars[i]->requires_grad) continue;
            scalars[i]->ensure_grad();
            scalars[i]->grad.data[0] += weights[i] * self.grad.data[0];
        }
    });
}

/// Runs reverse-mode accumulation from a scalar root. Parameter leaves keep
/// their gradients across calls, so per-sample losses accumulate until the
/// optimizer consumes them.
inline void backward(const Var& root) {
    if (root->value.numel() != 1)
        throw std::invalid_argument("backward: root must be a scalar");
    if (!root->requires_grad)
        throw std::invalid_argument("backward: root does not require grad");

    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(root.get(), 0);
    visited.insert(root.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            Node* p = node->parents[next++].get();
            if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    root->ensure_grad();
    root->grad.data[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && !n->grad.data.empty()) n->backprop(*n);
    }
}

}  // namespace fuseg
