#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "betak/bilevel.hpp"
#include "betak/model.hpp"
#include "betak/tensor.hpp"

namespace betak::testing {

inline Tensor random_tensor(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return Tensor::vector(std::move(v));
}

inline Model random_model(ModelKind kind, std::size_t dim, std::size_t classes, Activation act, std::uint64_t seed,
                          std::vector<std::size_t> hidden = {6}) {
    Model m;
    if (kind == ModelKind::LinearSoftmax) {
        m = Model::linear_softmax(dim, classes);
    } else {
        std::vector<std::size_t> dims{dim};
        dims.insert(dims.end(), hidden.begin(), hidden.end());
        dims.push_back(classes);
        m = Model::mlp(dims, act);
    }
    m.initialize(seed);
    // Non-zero biases exercise every term of the backward pass.
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    std::normal_distribution<double> n(0.0, 0.3);
    for (auto& layer : m.mutable_layers()) {
        for (auto& b : layer.bias) b = n(rng);
    }
    return m;
}

/// Central differences of a scalar function along every coordinate.
inline Tensor fd_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h = 1e-5) {
    Tensor g = Tensor::zeros_like(x);
    for (std::size_t i = 0; i < x.size(); ++i) {
        Tensor p = x, m = x;
        p[i] += h;
        m[i] -= h;
        g[i] = (f(p) - f(m)) / (2.0 * h);
    }
    return g;
}

/// Central difference of a vector function along direction v.
inline Tensor fd_directional(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, const Tensor& v,
                             double h = 1e-5) {
    Tensor p = x, m = x;
    axpy(h, v, p);
    axpy(-h, v, m);
    Tensor d = f(p) - f(m);
    d *= 1.0 / (2.0 * h);
    return d;
}

inline double rel_error(const Tensor& got, const Tensor& want) {
    const double scale = std::max(norm_l2(want), 1e-12);
    return norm_l2(got - want) / scale;
}

/// f(phi) = 0.5 * |phi - c|^2.
class QuadraticLower final : public LowerObjective {
public:
    explicit QuadraticLower(Tensor c) : c_(std::move(c)) {}
    double value(const Tensor& phi) const override {
        const Tensor d = phi - c_;
        return 0.5 * dot(d, d);
    }
    Tensor gradient(const Tensor& phi) const override { return phi - c_; }
    Tensor hvp(const Tensor&, const Tensor& v) const override { return v; }

private:
    Tensor c_;
};

/// f(phi) = b . phi.
class LinearLower final : public LowerObjective {
public:
    explicit LinearLower(Tensor b) : b_(std::move(b)) {}
    double value(const Tensor& phi) const override { return dot(b_, phi); }
    Tensor gradient(const Tensor&) const override { return b_; }
    Tensor hvp(const Tensor&, const Tensor& v) const override { return Tensor::zeros_like(v); }

private:
    Tensor b_;
};

/// F(phi) = a . phi.
class LinearUpper final : public PerturbationObjective {
public:
    explicit LinearUpper(Tensor a) : a_(std::move(a)) {}
    double value(const Tensor& phi) const override { return dot(a_, phi); }
    Tensor gradient(const Tensor&) const override { return a_; }

private:
    Tensor a_;
};

/// A constraint whose ball and box never bind for the closed-form checks.
inline PerturbationConstraint wide_constraint(std::size_t n) {
    PerturbationConstraint c;
    c.epsilon = 1e6;
    c.clean = Tensor(std::vector<std::size_t>{n}, 0.0);
    c.box_low = -1e7;
    c.box_high = 1e7;
    return c;
}

}  // namespace betak::testing
