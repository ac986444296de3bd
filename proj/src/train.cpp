#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "betak/errors.hpp"
#include "betak/model.hpp"

namespace betak {

namespace {

double activation_slope(Activation act, double z) {
    if (act == Activation::Tanh) {
        const double t = std::tanh(z);
        return 1.0 - t * t;
    }
    return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double activation_value(Activation act, double z) {
    if (act == Activation::Tanh) return std::tanh(z);
    return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

struct Gradients {
    std::vector<std::vector<double>> weight;
    std::vector<std::vector<double>> bias;
};

// Accumulates d(cross-entropy)/d(params) for one sample; returns the sample loss.
double accumulate_sample(const Model& model, const LabeledSample& s, Gradients& acc) {
    const auto& layers = model.layers();
    const std::size_t depth = layers.size();
    std::vector<std::vector<double>> act(depth);
    std::vector<std::vector<double>> pre(depth);
    act[0] = s.features.data();
    for (std::size_t l = 0; l < depth; ++l) {
        const auto& L = layers[l];
        pre[l].assign(L.out, 0.0);
        for (std::size_t o = 0; o < L.out; ++o) {
            double z = L.bias[o];
            for (std::size_t i = 0; i < L.in; ++i) z += L.weight[o * L.in + i] * act[l][i];
            pre[l][o] = z;
        }
        if (l + 1 < depth) {
            act[l + 1].resize(L.out);
            for (std::size_t o = 0; o < L.out; ++o) act[l + 1][o] = activation_value(model.activation(), pre[l][o]);
        }
    }
    const auto& z = pre.back();
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> g(z.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        g[i] = std::exp(z[i] - m);
        sum += g[i];
    }
    for (auto& v : g) v /= sum;
    const double sample_loss = m + std::log(sum) - z[s.label];
    g[s.label] -= 1.0;

    for (std::size_t l = depth; l-- > 0;) {
        const auto& L = layers[l];
        for (std::size_t o = 0; o < L.out; ++o) {
            acc.bias[l][o] += g[o];
            for (std::size_t i = 0; i < L.in; ++i) acc.weight[l][o * L.in + i] += g[o] * act[l][i];
        }
        if (l == 0) break;
        std::vector<double> prev(L.in, 0.0);
        for (std::size_t o = 0; o < L.out; ++o) {
            for (std::size_t i = 0; i < L.in; ++i) prev[i] += L.weight[o * L.in + i] * g[o];
        }
        for (std::size_t i = 0; i < L.in; ++i) prev[i] *= activation_slope(model.activation(), pre[l - 1][i]);
        g = std::move(prev);
    }
    return sample_loss;
}

void validate(const Model& model, const std::vector<LabeledSample>& data) {
    if (data.empty()) throw InputError("training set is empty");
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (data[i].features.size() != model.input_dim()) {
            throw DimensionError("sample " + std::to_string(i) + " has " +
                                 std::to_string(data[i].features.size()) + " features, model expects " +
                                 std::to_string(model.input_dim()));
        }
        if (data[i].label >= model.classes()) {
            throw InputError("sample " + std::to_string(i) + " label out of range");
        }
    }
}

struct FeatureScaling {
    std::vector<double> mean;
    std::vector<double> scale;
};

FeatureScaling feature_scaling(const std::vector<LabeledSample>& data, std::size_t dim) {
    FeatureScaling fs{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
    for (const auto& s : data) {
        for (std::size_t j = 0; j < dim; ++j) fs.mean[j] += s.features[j];
    }
    for (auto& m : fs.mean) m /= static_cast<double>(data.size());
    for (const auto& s : data) {
        for (std::size_t j = 0; j < dim; ++j) {
            const double d = s.features[j] - fs.mean[j];
            fs.scale[j] += d * d;
        }
    }
    for (auto& v : fs.scale) {
        v = std::sqrt(v / static_cast<double>(data.size()));
        if (!(v > 1e-12)) v = 1.0;
    }
    return fs;
}

// Rewrites the first layer so that the model on z = (x - mean) / scale equals
// the original model on x (forward = true), or the inverse.
void rescale_first_layer(Model& model, const FeatureScaling& fs, bool forward) {
    auto& L = model.mutable_layers().front();
    for (std::size_t o = 0; o < L.out; ++o) {
        double* row = L.weight.data() + o * L.in;
        if (forward) {
            double shift = 0.0;
            for (std::size_t i = 0; i < L.in; ++i) shift += row[i] * fs.mean[i];
            L.bias[o] += shift;
            for (std::size_t i = 0; i < L.in; ++i) row[i] *= fs.scale[i];
        } else {
            for (std::size_t i = 0; i < L.in; ++i) row[i] /= fs.scale[i];
            double shift = 0.0;
            for (std::size_t i = 0; i < L.in; ++i) shift += row[i] * fs.mean[i];
            L.bias[o] -= shift;
        }
    }
}

}  // namespace

Model train(const Model& initial, const std::vector<LabeledSample>& data, const TrainOptions& opts,
            TrainReport* report) {
    validate(initial, data);
    if (opts.batch_size == 0) throw ConfigError("batch size must be positive");
    if (!(opts.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");

    Model model = initial;
    if (opts.epochs == 0) {
        if (report) {
            double total = 0.0;
            for (const auto& s : data) total += model.loss(s.features, s.label, LossKind::CrossEntropy);
            *report = {0, total / static_cast<double>(data.size()), accuracy(model, data)};
            model.audit().reset();
        }
        return model;
    }

    std::vector<LabeledSample> standardized;
    FeatureScaling scaling;
    if (opts.standardize_inputs) {
        scaling = feature_scaling(data, model.input_dim());
        standardized = data;
        for (auto& s : standardized) {
            for (std::size_t j = 0; j < s.features.size(); ++j) {
                s.features[j] = (s.features[j] - scaling.mean[j]) / scaling.scale[j];
            }
        }
        rescale_first_layer(model, scaling, true);
    }
    const auto& samples = opts.standardize_inputs ? standardized : data;

    std::mt19937_64 rng(opts.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    Gradients grads;
    for (const auto& L : model.layers()) {
        grads.weight.emplace_back(L.weight.size(), 0.0);
        grads.bias.emplace_back(L.bias.size(), 0.0);
    }

    for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
            const std::size_t stop = std::min(order.size(), start + opts.batch_size);
            for (auto& w : grads.weight) std::fill(w.begin(), w.end(), 0.0);
            for (auto& b : grads.bias) std::fill(b.begin(), b.end(), 0.0);
            for (std::size_t j = start; j < stop; ++j) accumulate_sample(model, samples[order[j]], grads);
            const double scale = opts.learning_rate / static_cast<double>(stop - start);
            auto& layers = model.mutable_layers();
            for (std::size_t l = 0; l < layers.size(); ++l) {
                for (std::size_t i = 0; i < layers[l].weight.size(); ++i) {
                    layers[l].weight[i] -= scale * grads.weight[l][i] +
                                           opts.learning_rate * opts.weight_decay * layers[l].weight[i];
                }
                for (std::size_t i = 0; i < layers[l].bias.size(); ++i) layers[l].bias[i] -= scale * grads.bias[l][i];
            }
        }
    }

    if (opts.standardize_inputs) rescale_first_layer(model, scaling, false);

    if (report) {
        double total = 0.0;
        for (const auto& s : data) total += model.loss(s.features, s.label, LossKind::CrossEntropy);
        report->epochs = opts.epochs;
        report->final_loss = total / static_cast<double>(data.size());
        report->train_accuracy = accuracy(model, data);
    }
    model.audit().reset();
    return model;
}

double accuracy(const Model& model, const std::vector<LabeledSample>& data) {
    if (data.empty()) throw InputError("cannot measure accuracy on an empty set");
    std::size_t correct = 0;
    for (const auto& s : data) correct += model.predict(s.features) == s.label ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(data.size());
}

}  // namespace betak
