#include <cmath>
#include <string>

#include "betak/attack.hpp"
#include "betak/errors.hpp"

namespace betak {

AttackLoss::AttackLoss(const Model& model, std::size_t label, LossKind kind, double orientation)
    : model_(&model), label_(label), kind_(kind), orientation_(orientation) {
    if (orientation != 1.0 && orientation != -1.0) throw ConfigError("attack loss orientation must be +1 or -1");
    if (label >= model.classes()) throw InputError("attack label out of range");
}

AttackLoss AttackLoss::untargeted(const Model& model, std::size_t true_label) {
    return AttackLoss(model, true_label, LossKind::CrossEntropy, 1.0);
}

AttackLoss AttackLoss::targeted(const Model& model, std::size_t target_label) {
    return AttackLoss(model, target_label, LossKind::NegTargetLogit, -1.0);
}

double AttackLoss::value(const Tensor& x) const { return orientation_ * model_->loss(x, label_, kind_); }

Tensor AttackLoss::gradient(const Tensor& x) const {
    auto g = model_->grad_input(x, label_, kind_);
    if (orientation_ < 0.0) g *= -1.0;
    return g;
}

Tensor AttackLoss::hvp(const Tensor& x, const Tensor& v) const {
    auto h = model_->hvp_input(x, label_, kind_, v);
    if (orientation_ < 0.0) h *= -1.0;
    return h;
}

std::string_view to_string(AttackerKind kind) {
    switch (kind) {
        case AttackerKind::Pgd: return "pgd";
        case AttackerKind::MiFgsm: return "mi-fgsm";
        case AttackerKind::VmiFgsm: return "vmi-fgsm";
        case AttackerKind::SmoothGa: return "smooth-ga";
    }
    return "?";
}

AttackerKind parse_attacker_kind(std::string_view name) {
    if (name == "pgd") return AttackerKind::Pgd;
    if (name == "mi-fgsm") return AttackerKind::MiFgsm;
    if (name == "vmi-fgsm") return AttackerKind::VmiFgsm;
    if (name == "smooth-ga") return AttackerKind::SmoothGa;
    throw ConfigError("unknown attacker '" + std::string(name) + "'");
}

void AttackerSpec::validate() const {
    if (steps < 1) throw ConfigError("attacker steps must be at least 1");
    if (!(step_size > 0.0)) throw ConfigError("attacker step size must be positive");
    if (!(momentum_decay >= 0.0)) throw ConfigError("momentum decay must be non-negative");
    if (!(variance_bound >= 0.0)) throw ConfigError("variance bound must be non-negative");
}

bool attack_succeeds(const AttackLoss& loss, const Tensor& x) {
    const bool hit = loss.model().predict(x) == loss.label();
    return loss.kind() == LossKind::CrossEntropy && loss.orientation() > 0.0 ? !hit : hit;
}

AttackerSpec AttackerSpec::baseline(AttackerKind kind, double epsilon, std::size_t steps) {
    AttackerSpec spec;
    spec.kind = kind;
    spec.steps = steps;
    spec.step_size = epsilon / static_cast<double>(steps) * 2.5;
    spec.use_sign = kind != AttackerKind::SmoothGa;
    return spec;
}

namespace {

Tensor input_at(const PerturbationConstraint& c, const Tensor& phi) {
    require_same_shape(phi, c.clean, "attack input");
    return c.clean + phi;
}

// m <- decay * m + g / ||g||_1, with a zero gradient contributing nothing.
Tensor accumulate_momentum(const Tensor& momentum, const Tensor& g, double decay) {
    Tensor m = momentum;
    m *= decay;
    const double n1 = norm_l1(g);
    if (n1 > 0.0) axpy(1.0 / n1, g, m);
    return m;
}

}  // namespace

Tensor attack_step_pgd(const AttackLoss& loss, const PerturbationConstraint& constraint, const Tensor& phi,
                       double step_size, bool use_sign) {
    const auto g = loss.gradient(input_at(constraint, phi));
    Tensor next = phi;
    axpy(step_size, use_sign ? sign(g) : g, next);
    return project(constraint, next).delta;
}

MomentumStep attack_step_mifgsm(const AttackLoss& loss, const PerturbationConstraint& constraint,
                                const Tensor& phi, const Tensor& momentum, double step_size, double decay) {
    require_same_shape(momentum, phi, "momentum state");
    const auto g = loss.gradient(input_at(constraint, phi));
    MomentumStep out{phi, accumulate_momentum(momentum, g, decay)};
    axpy(step_size, sign(out.momentum), out.phi);
    out.phi = project(constraint, out.phi).delta;
    return out;
}

VarianceStep attack_step_vmifgsm(const AttackLoss& loss, const PerturbationConstraint& constraint,
                                 const Tensor& phi, const Tensor& momentum, const Tensor& variance,
                                 double step_size, double decay, std::size_t samples, double bound,
                                 std::mt19937_64& rng) {
    require_same_shape(momentum, phi, "momentum state");
    require_same_shape(variance, phi, "variance state");
    const auto x = input_at(constraint, phi);
    const auto g = loss.gradient(x);

    Tensor tuned = g;
    if (samples > 0) tuned += variance;

    VarianceStep out{phi, accumulate_momentum(momentum, tuned, decay), Tensor::zeros_like(phi)};
    if (samples > 0) {
        const double radius = bound * constraint.epsilon;
        std::uniform_real_distribution<double> offset(-radius, radius);
        Tensor neighbour_sum = Tensor::zeros_like(phi);
        for (std::size_t s = 0; s < samples; ++s) {
            Tensor neighbour = x;
            for (auto& v : neighbour.values()) v += offset(rng);
            neighbour_sum += loss.gradient(neighbour);
        }
        out.variance = (1.0 / static_cast<double>(samples)) * std::move(neighbour_sum);
        out.variance -= g;
    }
    axpy(step_size, sign(out.momentum), out.phi);
    out.phi = project(constraint, out.phi).delta;
    return out;
}

Tensor run_attacker(const AttackerSpec& spec, const AttackLoss& loss, const PerturbationConstraint& constraint,
                    const Tensor& delta_init, std::mt19937_64& rng) {
    spec.validate();
    require_same_shape(delta_init, constraint.clean, "attacker initialization");
    Tensor phi = delta_init;
    Tensor momentum = Tensor::zeros_like(phi);
    Tensor variance = Tensor::zeros_like(phi);
    for (std::size_t k = 0; k < spec.steps; ++k) {
        switch (spec.kind) {
            case AttackerKind::Pgd:
                phi = attack_step_pgd(loss, constraint, phi, spec.step_size, spec.use_sign);
                break;
            case AttackerKind::SmoothGa:
                phi = attack_step_pgd(loss, constraint, phi, spec.step_size, false);
                break;
            case AttackerKind::MiFgsm: {
                auto step = attack_step_mifgsm(loss, constraint, phi, momentum, spec.step_size, spec.momentum_decay);
                phi = std::move(step.phi);
                momentum = std::move(step.momentum);
                break;
            }
            case AttackerKind::VmiFgsm: {
                auto step = attack_step_vmifgsm(loss, constraint, phi, momentum, variance, spec.step_size,
                                                spec.momentum_decay, spec.variance_samples, spec.variance_bound,
                                                rng);
                phi = std::move(step.phi);
                momentum = std::move(step.momentum);
                variance = std::move(step.variance);
                break;
            }
        }
        if (!phi.all_finite()) throw NumericalError("attacker produced a non-finite perturbation", k);
    }
    return phi;
}

}  // namespace betak
