#pragma once

// Finite-difference gradient oracle used by the unit and acceptance suites.
// Deliberately independent of the backward implementations it checks: it only
// re-runs forward code on perturbed copies of the inputs.

#include <cmath>
#include <functional>
#include <memory>

#include "fuseg/autodiff.hpp"
#include "fuseg/rng.hpp"
#include "fuseg/tensor.hpp"

namespace fuseg::test {

inline Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
    Tensor t(std::move(shape));
    for (double& v : t.data) v = rng.uniform(lo, hi);
    return t;
}

// Keeps values away from the relu kink so central differences stay valid.
inline Tensor random_tensor_no_kink(std::vector<int> shape, Rng& rng, double margin = 0.05) {
    Tensor t = random_tensor(std::move(shape), rng);
    for (double& v : t.data)
        if (std::fabs(v) < margin) v = v < 0.0 ? v - margin : v + margin;
    return t;
}

inline double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * b.data[i];
    return s;
}

// Scalar projection node <t, r>; turns any op output into a scalar loss so a
// single backward() exposes the op's full Jacobian action.
inline Var project(const Var& t, const Tensor& r) {
    auto n = std::make_shared<Node>();
    n->value = Tensor({1}, std::vector<double>{dot(t->value, r)});
    if (t->requires_grad) {
        n->requires_grad = true;
        n->parents = {t};
        Tensor rc = r;
        n->backprop = [t, rc](Node& self) {
            t->ensure_grad();
            for (std::size_t i = 0; i < rc.data.size(); ++i)
                t->grad.data[i] += self.grad.data[0] * rc.data[i];
        };
    }
    return n;
}

// Central differences of an arbitrary scalar function with respect to x.
// The function must re-read x on every call.
template <typename LossFn>
Tensor finite_difference(LossFn&& loss, Tensor& x, double eps = 1e-4) {
    Tensor g(x.shape);
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const double orig = x.data[i];
        x.data[i] = orig + eps;
        const double fp = loss();
        x.data[i] = orig - eps;
        const double fm = loss();
        x.data[i] = orig;
        g.data[i] = (fp - fm) / (2.0 * eps);
    }
    return g;
}

inline double max_rel_err(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double denom = std::max({std::fabs(a.data[i]), std::fabs(b.data[i]), 1.0});
        m = std::max(m, std::fabs(a.data[i] - b.data[i]) / denom);
    }
    return m;
}

}  // namespace fuseg::test
