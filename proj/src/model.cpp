#include "betak/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "betak/errors.hpp"

namespace betak {

std::string_view to_string(ModelKind kind) {
    return kind == ModelKind::LinearSoftmax ? "linear-softmax" : "mlp";
}

std::string_view to_string(Activation act) { return act == Activation::Tanh ? "tanh" : "softplus"; }

std::string_view to_string(LossKind kind) {
    return kind == LossKind::CrossEntropy ? "cross-entropy" : "neg-target-logit";
}

ModelKind parse_model_kind(std::string_view name) {
    if (name == "linear-softmax") return ModelKind::LinearSoftmax;
    if (name == "mlp") return ModelKind::Mlp;
    throw ConfigError("unknown model kind '" + std::string(name) + "'");
}

Activation parse_activation(std::string_view name) {
    if (name == "tanh") return Activation::Tanh;
    if (name == "softplus") return Activation::Softplus;
    throw ConfigError("unknown activation '" + std::string(name) + "' (expected tanh or softplus)");
}

LossKind parse_loss_kind(std::string_view name) {
    if (name == "cross-entropy") return LossKind::CrossEntropy;
    if (name == "neg-target-logit") return LossKind::NegTargetLogit;
    throw ConfigError("unknown loss kind '" + std::string(name) + "'");
}

QueryAudit& QueryAudit::operator=(const QueryAudit& other) noexcept {
    forward_.store(other.forward(), std::memory_order_relaxed);
    gradient_.store(other.gradient(), std::memory_order_relaxed);
    hvp_.store(other.hvp(), std::memory_order_relaxed);
    return *this;
}

void QueryAudit::reset() const noexcept {
    forward_.store(0, std::memory_order_relaxed);
    gradient_.store(0, std::memory_order_relaxed);
    hvp_.store(0, std::memory_order_relaxed);
}

namespace {

struct ActivationDerivs {
    double value;
    double first;
    double second;
};

ActivationDerivs activate(Activation act, double z) {
    if (act == Activation::Tanh) {
        const double t = std::tanh(z);
        const double d1 = 1.0 - t * t;
        return {t, d1, -2.0 * t * d1};
    }
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    const double sp = std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
    return {sp, s, s * (1.0 - s)};
}

void affine(const DenseLayer& layer, const std::vector<double>& in, std::vector<double>& out) {
    out.assign(layer.out, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
        const double* row = layer.weight.data() + o * layer.in;
        double s = layer.bias[o];
        for (std::size_t i = 0; i < layer.in; ++i) s += row[i] * in[i];
        out[o] = s;
    }
}

void linear(const DenseLayer& layer, const std::vector<double>& in, std::vector<double>& out) {
    out.assign(layer.out, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
        const double* row = layer.weight.data() + o * layer.in;
        double s = 0.0;
        for (std::size_t i = 0; i < layer.in; ++i) s += row[i] * in[i];
        out[o] = s;
    }
}

// out = W^T g
void linear_transpose(const DenseLayer& layer, const std::vector<double>& g, std::vector<double>& out) {
    out.assign(layer.in, 0.0);
    for (std::size_t o = 0; o < layer.out; ++o) {
        const double* row = layer.weight.data() + o * layer.in;
        const double go = g[o];
        if (go == 0.0) continue;
        for (std::size_t i = 0; i < layer.in; ++i) out[i] += row[i] * go;
    }
}

std::vector<double> softmax(const std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> p(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - m);
        s += p[i];
    }
    for (auto& v : p) v /= s;
    return p;
}

double log_sum_exp(const std::vector<double>& z) {
    const double m = *std::max_element(z.begin(), z.end());
    double s = 0.0;
    for (double v : z) s += std::exp(v - m);
    return m + std::log(s);
}

DenseLayer zero_layer(std::size_t in, std::size_t out) {
    if (in == 0 || out == 0) throw DimensionError("layer dimensions must be positive");
    return DenseLayer{in, out, std::vector<double>(in * out, 0.0), std::vector<double>(out, 0.0)};
}

}  // namespace

struct Model::Cache {
    // pre[l] = W_l a_l + b_l, act[l] = input of layer l (act[0] = x)
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> act;
};

Model Model::linear_softmax(std::size_t dim, std::size_t classes) {
    std::vector<DenseLayer> layers;
    layers.push_back(zero_layer(dim, classes));
    return from_layers(ModelKind::LinearSoftmax, Activation::Tanh, std::move(layers));
}

Model Model::mlp(const std::vector<std::size_t>& dims, Activation act) {
    if (dims.size() < 3) {
        throw DimensionError("mlp needs input, at least one hidden, and output dimensions");
    }
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) layers.push_back(zero_layer(dims[l], dims[l + 1]));
    return from_layers(ModelKind::Mlp, act, std::move(layers));
}

Model Model::from_layers(ModelKind kind, Activation act, std::vector<DenseLayer> layers) {
    if (layers.empty()) throw DimensionError("model needs at least one layer");
    if (kind == ModelKind::LinearSoftmax && layers.size() != 1) {
        throw DimensionError("linear-softmax model has exactly one layer");
    }
    if (kind == ModelKind::Mlp && layers.size() < 2) {
        throw DimensionError("mlp model needs at least two layers");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& layer = layers[l];
        if (layer.in == 0 || layer.out == 0 || layer.weight.size() != layer.in * layer.out ||
            layer.bias.size() != layer.out) {
            throw DimensionError("layer " + std::to_string(l) + " has inconsistent sizes");
        }
        if (l > 0 && layers[l - 1].out != layer.in) {
            throw DimensionError("layer " + std::to_string(l) + " input does not match previous output");
        }
    }
    if (layers.back().out < 2) throw DimensionError("classifier needs at least two classes");
    Model m;
    m.kind_ = kind;
    m.activation_ = act;
    m.layers_ = std::move(layers);
    return m;
}

void Model::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (auto& layer : layers_) {
        std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(layer.in)));
        for (auto& w : layer.weight) w = dist(rng);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
}

void Model::check_input(const Tensor& x) const {
    if (x.size() != input_dim()) {
        throw DimensionError("model expects " + std::to_string(input_dim()) + " input features, got " +
                             std::to_string(x.size()));
    }
}

void Model::check_label(std::size_t y) const {
    if (y >= classes()) {
        throw InputError("class index " + std::to_string(y) + " out of range for " +
                         std::to_string(classes()) + " classes");
    }
}

Model::Cache Model::run_forward(const Tensor& x) const {
    check_input(x);
    Cache c;
    c.act.reserve(layers_.size());
    c.pre.resize(layers_.size());
    c.act.emplace_back(x.data());
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        affine(layers_[l], c.act[l], c.pre[l]);
        if (l + 1 < layers_.size()) {
            std::vector<double> a(c.pre[l].size());
            for (std::size_t i = 0; i < a.size(); ++i) a[i] = activate(activation_, c.pre[l][i]).value;
            c.act.push_back(std::move(a));
        }
    }
    return c;
}

Tensor Model::forward_logits(const Tensor& x) const {
    audit_.count_forward();
    return Tensor::vector(run_forward(x).pre.back());
}

std::size_t Model::predict(const Tensor& x) const {
    const auto logits = forward_logits(x);
    const auto v = logits.values();
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

double Model::loss(const Tensor& x, std::size_t y, LossKind kind) const {
    check_label(y);
    audit_.count_forward();
    const auto cache = run_forward(x);
    const auto& z = cache.pre.back();
    if (kind == LossKind::CrossEntropy) return log_sum_exp(z) - z[y];
    return -z[y];
}

Tensor Model::grad_input(const Tensor& x, std::size_t y, LossKind kind) const {
    check_label(y);
    audit_.count_gradient();
    const auto c = run_forward(x);
    std::vector<double> g;
    if (kind == LossKind::CrossEntropy) {
        g = softmax(c.pre.back());
        g[y] -= 1.0;
    } else {
        g.assign(classes(), 0.0);
        g[y] = -1.0;
    }
    std::vector<double> ga;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        linear_transpose(layers_[l], g, ga);
        if (l == 0) break;
        g.resize(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) g[i] = activate(activation_, c.pre[l - 1][i]).first * ga[i];
    }
    return Tensor(x.shape(), std::move(ga));
}

Tensor Model::hvp_input(const Tensor& x, std::size_t y, LossKind kind, const Tensor& v) const {
    check_label(y);
    require_same_shape(x, v, "hvp_input direction");
    audit_.count_hvp();
    const auto c = run_forward(x);
    const std::size_t depth = layers_.size();

    // Forward tangent along v.
    std::vector<std::vector<double>> tangent_pre(depth);
    std::vector<double> tangent_act = v.data();
    for (std::size_t l = 0; l < depth; ++l) {
        linear(layers_[l], tangent_act, tangent_pre[l]);
        if (l + 1 < depth) {
            tangent_act.resize(tangent_pre[l].size());
            for (std::size_t i = 0; i < tangent_act.size(); ++i) {
                tangent_act[i] = activate(activation_, c.pre[l][i]).first * tangent_pre[l][i];
            }
        }
    }

    // Output gradient and its tangent.
    std::vector<double> g(classes(), 0.0);
    std::vector<double> tg(classes(), 0.0);
    if (kind == LossKind::CrossEntropy) {
        const auto p = softmax(c.pre.back());
        const auto& tz = tangent_pre.back();
        double ptz = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) ptz += p[i] * tz[i];
        for (std::size_t i = 0; i < p.size(); ++i) {
            g[i] = p[i];
            tg[i] = p[i] * (tz[i] - ptz);
        }
        g[y] -= 1.0;
    } else {
        g[y] = -1.0;
    }

    // Reverse sweep of gradient and tangent together.
    std::vector<double> ga;
    std::vector<double> tga;
    for (std::size_t l = depth; l-- > 0;) {
        linear_transpose(layers_[l], g, ga);
        linear_transpose(layers_[l], tg, tga);
        if (l == 0) break;
        g.resize(ga.size());
        tg.resize(ga.size());
        for (std::size_t i = 0; i < ga.size(); ++i) {
            const auto d = activate(activation_, c.pre[l - 1][i]);
            g[i] = d.first * ga[i];
            tg[i] = d.second * tangent_pre[l - 1][i] * ga[i] + d.first * tga[i];
        }
    }
    return Tensor(x.shape(), std::move(tga));
}

}  // namespace betak
