#pragma once

#include <cstddef>
#include <random>
#include <string_view>

#include "betak/model.hpp"
#include "betak/tensor.hpp"

namespace betak {

/// The quantity an attacker ascends at input x = clean + phi.
///
/// Untargeted attacks ascend the cross-entropy of the true label. Targeted
/// attacks descend the negative target logit, i.e. ascend the target logit.
/// `orientation` is +1 or -1 and multiplies the model loss.
class AttackLoss {
public:
    AttackLoss(const Model& model, std::size_t label, LossKind kind, double orientation);

    static AttackLoss untargeted(const Model& model, std::size_t true_label);
    static AttackLoss targeted(const Model& model, std::size_t target_label);

    const Model& model() const noexcept { return *model_; }
    std::size_t label() const noexcept { return label_; }
    LossKind kind() const noexcept { return kind_; }
    double orientation() const noexcept { return orientation_; }

    double value(const Tensor& x) const;
    Tensor gradient(const Tensor& x) const;
    Tensor hvp(const Tensor& x, const Tensor& v) const;

private:
    const Model* model_;
    std::size_t label_;
    LossKind kind_;
    double orientation_;
};

/// Untargeted losses succeed once the prediction leaves the label, targeted
/// losses once it reaches the label.
bool attack_succeeds(const AttackLoss& loss, const Tensor& x);

/// L-infinity ball of radius epsilon around zero, intersected with the box
/// constraint clean + delta in [box_low, box_high].
struct PerturbationConstraint {
    double epsilon = 8.0 / 255.0;
    Tensor clean;
    double box_low = 0.0;
    double box_high = 1.0;

    void validate() const;
};

struct Projection {
    Tensor delta;
    /// 1 where neither clamp fired, 0 where the coordinate was clipped.
    Tensor mask;
};

/// Clamp to [-eps, eps], then clamp clean + delta into the box.
Projection project(const PerturbationConstraint& constraint, const Tensor& delta);
bool is_feasible(const PerturbationConstraint& constraint, const Tensor& delta);

enum class AttackerKind { Pgd, MiFgsm, VmiFgsm, SmoothGa };

std::string_view to_string(AttackerKind kind);
AttackerKind parse_attacker_kind(std::string_view name);

struct AttackerSpec {
    AttackerKind kind = AttackerKind::Pgd;
    std::size_t steps = 10;
    double step_size = 2.0 / 255.0;
    double momentum_decay = 1.0;
    std::size_t variance_samples = 20;
    /// Neighborhood half-width as a multiple of epsilon.
    double variance_bound = 1.5;
    bool use_sign = true;

    void validate() const;

    /// Baseline defaults: step_size = 2.5 * epsilon / steps.
    static AttackerSpec baseline(AttackerKind kind, double epsilon, std::size_t steps);
};

Tensor attack_step_pgd(const AttackLoss& loss, const PerturbationConstraint& constraint, const Tensor& phi,
                       double step_size, bool use_sign);

struct MomentumStep {
    Tensor phi;
    Tensor momentum;
};

MomentumStep attack_step_mifgsm(const AttackLoss& loss, const PerturbationConstraint& constraint,
                                const Tensor& phi, const Tensor& momentum, double step_size, double decay);

struct VarianceStep {
    Tensor phi;
    Tensor momentum;
    Tensor variance;
};

/// Variance-tuned momentum step. Neighbours are clean + phi + r with r uniform
/// in [-bound * eps, bound * eps]^d, drawn from `rng`.
VarianceStep attack_step_vmifgsm(const AttackLoss& loss, const PerturbationConstraint& constraint,
                                 const Tensor& phi, const Tensor& momentum, const Tensor& variance,
                                 double step_size, double decay, std::size_t samples, double bound,
                                 std::mt19937_64& rng);

Tensor run_attacker(const AttackerSpec& spec, const AttackLoss& loss, const PerturbationConstraint& constraint,
                    const Tensor& delta_init, std::mt19937_64& rng);

}  // namespace betak
