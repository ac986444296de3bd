#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "betak/tensor.hpp"

namespace betak {

enum class ModelKind { LinearSoftmax, Mlp };
enum class Activation { Tanh, Softplus };
enum class LossKind { CrossEntropy, NegTargetLogit };

std::string_view to_string(ModelKind kind);
std::string_view to_string(Activation act);
std::string_view to_string(LossKind kind);
ModelKind parse_model_kind(std::string_view name);
Activation parse_activation(std::string_view name);
LossKind parse_loss_kind(std::string_view name);

/// A feature vector in [0,1]^d paired with its class index.
struct LabeledSample {
    Tensor features;
    std::size_t label = 0;
};

/// Fully connected layer, weight stored out x in row-major.
struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    std::vector<double> weight;
    std::vector<double> bias;

    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

/// Per-model query counters. Copies snapshot the current values.
class QueryAudit {
public:
    QueryAudit() = default;
    QueryAudit(const QueryAudit& other) noexcept { *this = other; }
    QueryAudit& operator=(const QueryAudit& other) noexcept;

    void count_forward() const noexcept { forward_.fetch_add(1, std::memory_order_relaxed); }
    void count_gradient() const noexcept { gradient_.fetch_add(1, std::memory_order_relaxed); }
    void count_hvp() const noexcept { hvp_.fetch_add(1, std::memory_order_relaxed); }

    std::uint64_t forward() const noexcept { return forward_.load(std::memory_order_relaxed); }
    std::uint64_t gradient() const noexcept { return gradient_.load(std::memory_order_relaxed); }
    std::uint64_t hvp() const noexcept { return hvp_.load(std::memory_order_relaxed); }
    void reset() const noexcept;

private:
    mutable std::atomic<std::uint64_t> forward_{0};
    mutable std::atomic<std::uint64_t> gradient_{0};
    mutable std::atomic<std::uint64_t> hvp_{0};
};

/// Small classifier with closed-form input gradient and input Hessian-vector product.
///
/// Hidden layers use a smooth activation (tanh or softplus); the last layer is
/// affine and produces logits. A linear-softmax model is a single affine layer.
/// Instances are immutable once trained apart from the query audit counters,
/// which are atomic, so concurrent read-only use is safe.
class Model {
public:
    Model() = default;

    /// Zero-initialized `classes x dim` affine model.
    static Model linear_softmax(std::size_t dim, std::size_t classes);
    /// Zero-initialized MLP. `dims` = {input, hidden..., classes}, at least one hidden layer.
    static Model mlp(const std::vector<std::size_t>& dims, Activation act);
    static Model from_layers(ModelKind kind, Activation act, std::vector<DenseLayer> layers);

    ModelKind kind() const noexcept { return kind_; }
    Activation activation() const noexcept { return activation_; }
    std::size_t input_dim() const noexcept { return layers_.front().in; }
    std::size_t classes() const noexcept { return layers_.back().out; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::vector<DenseLayer>& mutable_layers() noexcept { return layers_; }
    const QueryAudit& audit() const noexcept { return audit_; }

    /// Gaussian fan-in scaled initialization, deterministic per seed.
    void initialize(std::uint64_t seed);

    Tensor forward_logits(const Tensor& x) const;
    std::size_t predict(const Tensor& x) const;
    double loss(const Tensor& x, std::size_t y, LossKind kind) const;
    Tensor grad_input(const Tensor& x, std::size_t y, LossKind kind) const;
    /// H(x) v with H the Hessian of loss(., y) at x.
    Tensor hvp_input(const Tensor& x, std::size_t y, LossKind kind, const Tensor& v) const;

    /// Same architecture and bitwise-equal parameters.
    bool same_parameters(const Model& other) const { return kind_ == other.kind_ && activation_ == other.activation_ && layers_ == other.layers_; }

private:
    struct Cache;
    Cache run_forward(const Tensor& x) const;
    void check_input(const Tensor& x) const;
    void check_label(std::size_t y) const;

    ModelKind kind_ = ModelKind::LinearSoftmax;
    Activation activation_ = Activation::Tanh;
    std::vector<DenseLayer> layers_;
    QueryAudit audit_;
};

struct TrainOptions {
    std::size_t epochs = 50;
    double learning_rate = 0.1;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    double weight_decay = 0.0;
    /// Run descent on per-feature standardized inputs and fold the affine map
    /// back into the first layer afterwards. The returned model still takes raw inputs.
    bool standardize_inputs = false;
};

struct TrainReport {
    std::size_t epochs = 0;
    double final_loss = 0.0;
    double train_accuracy = 0.0;
};

/// Mini-batch gradient descent on mean cross-entropy. Returns the trained copy.
Model train(const Model& initial, const std::vector<LabeledSample>& data, const TrainOptions& opts,
            TrainReport* report = nullptr);

double accuracy(const Model& model, const std::vector<LabeledSample>& data);

void save_model(const Model& model, std::ostream& out);
Model load_model(std::istream& in);
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace betak
