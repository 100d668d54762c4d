#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "fuseg/autodiff.hpp"
#include "fuseg/tensor.hpp"

namespace fuseg {

/// One trainable parameter: the leaf variable plus its momentum buffer.
struct ParamState {
    std::string name;
    Var var;
    Tensor velocity;

    ParamState(std::string n, Tensor init)
        : name(std::move(n)), var(make_leaf(std::move(init), true)), velocity(var->value.shape) {}

    Tensor& value() { return var->value; }
    const Tensor& value() const { return var->value; }
};

/// v <- momentum*v + g + weight_decay*value; value <- value - lr*v; grads cleared.
inline void sgd_step(std::vector<ParamState>& params, double lr, double momentum,
                     double weight_decay) {
    for (auto& p : params) {
        p.var->ensure_grad();
        Tensor& val = p.var->value;
        Tensor& g = p.var->grad;
        for (std::size_t i = 0; i < val.data.size(); ++i) {
            const double v =
                momentum * p.velocity.data[i] + g.data[i] + weight_decay * val.data[i];
            p.velocity.data[i] = v;
            val.data[i] -= lr * v;
            g.data[i] = 0.0;
        }
    }
}

inline double poly_lr(double base_lr, int iter, int max_iter, double power) {
    if (max_iter == 0) throw std::invalid_argument("poly_lr: max_iter must be positive");
    if (iter < 0 || iter > max_iter) throw std::invalid_argument("poly_lr: iter out of range");
    return base_lr * std::pow(1.0 - static_cast<double>(iter) / max_iter, power);
}

}  // namespace fuseg
