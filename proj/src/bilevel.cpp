#include "betak/bilevel.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "betak/errors.hpp"

namespace betak {

SurrogateObjective::SurrogateObjective(AttackLoss loss, Tensor clean)
    : loss_(std::move(loss)), clean_(std::move(clean)) {}

double SurrogateObjective::value(const Tensor& phi) const { return -loss_.value(clean_ + phi); }

Tensor SurrogateObjective::gradient(const Tensor& phi) const {
    auto g = loss_.gradient(clean_ + phi);
    g *= -1.0;
    return g;
}

Tensor SurrogateObjective::hvp(const Tensor& phi, const Tensor& v) const {
    auto h = loss_.hvp(clean_ + phi, v);
    h *= -1.0;
    return h;
}

UpperObjective::UpperObjective(std::vector<AttackLoss> pseudo_victims, Tensor clean)
    : victims_(std::move(pseudo_victims)), clean_(std::move(clean)) {
    if (victims_.empty()) throw ConfigError("upper objective needs at least one pseudo-victim");
}

double UpperObjective::value(const Tensor& phi) const {
    const auto x = clean_ + phi;
    double sum = 0.0;
    for (const auto& v : victims_) sum += v.value(x);
    return -sum / static_cast<double>(victims_.size());
}

Tensor UpperObjective::gradient(const Tensor& phi) const {
    const auto x = clean_ + phi;
    Tensor g = Tensor::zeros_like(phi);
    for (const auto& v : victims_) g += v.gradient(x);
    g *= -1.0 / static_cast<double>(victims_.size());
    return g;
}

Trajectory unroll(const LowerObjective& lower, const PerturbationConstraint& constraint, const Tensor& delta,
                  std::size_t steps, double alpha, const PerturbationObjective& upper) {
    if (steps < 1) throw ConfigError("unroll needs at least one step");
    if (!(alpha > 0.0)) throw ConfigError("lower-level step size must be positive");
    if (!is_feasible(constraint, delta)) throw InputError("unroll seed is not feasible");

    Trajectory traj;
    traj.ll_step_size = alpha;
    traj.phi.reserve(steps + 1);
    traj.masks.reserve(steps);
    traj.ul_values.reserve(steps);
    traj.phi.push_back(delta);
    for (std::size_t k = 0; k < steps; ++k) {
        const auto g = lower.gradient(traj.phi[k]);
        if (!g.all_finite()) throw NumericalError("non-finite lower-level gradient", k);
        Tensor next = traj.phi[k];
        axpy(-alpha, g, next);
        auto proj = project(constraint, next);
        const double F = upper.value(proj.delta);
        if (!std::isfinite(F)) throw NumericalError("non-finite upper-level value", k + 1);
        traj.phi.push_back(std::move(proj.delta));
        traj.masks.push_back(std::move(proj.mask));
        traj.ul_values.push_back(F);
    }
    return traj;
}

std::size_t dst_select(const Trajectory& traj) {
    if (traj.ul_values.empty()) throw InputError("trajectory has no recorded upper-level values");
    std::size_t best = 0;
    for (std::size_t k = 1; k < traj.ul_values.size(); ++k) {
        if (traj.ul_values[k] > traj.ul_values[best]) best = k;
    }
    return best + 1;
}

Tensor hgr(const Trajectory& traj, const LowerObjective& lower, const PerturbationObjective& upper,
           std::size_t ktilde) {
    if (ktilde < 1 || ktilde > traj.steps()) {
        throw InputError("truncation index " + std::to_string(ktilde) + " outside [1, " +
                         std::to_string(traj.steps()) + "]");
    }
    Tensor g = upper.gradient(traj.phi[ktilde]);
    if (!g.all_finite()) throw NumericalError("non-finite upper-level gradient", ktilde);
    // Each step's Jacobian is M_k (I - alpha H_f(phi_k)); H_f is symmetric.
    for (std::size_t k = ktilde; k-- > 0;) {
        Tensor masked = hadamard(traj.masks[k], g);
        const auto curvature = lower.hvp(traj.phi[k], masked);
        axpy(-traj.ll_step_size, curvature, masked);
        g = std::move(masked);
        if (!g.all_finite()) throw NumericalError("non-finite hypergradient", k);
    }
    return g;
}

AttackResult optimize_initialization(const BetakConfig& config, const LowerObjective& lower,
                                     const PerturbationObjective& upper, const PerturbationConstraint& constraint,
                                     const Tensor& delta0) {
    if (!is_feasible(constraint, delta0)) throw InputError("initial perturbation is not feasible");
    AttackResult result;
    Tensor delta = delta0;
    for (std::size_t t = 0; t < config.T; ++t) {
        const auto traj = unroll(lower, constraint, delta, config.K, config.alpha, upper);
        const std::size_t ktilde = config.dst_enabled ? dst_select(traj) : config.K;

        const auto start = std::chrono::steady_clock::now();
        const auto g = hgr(traj, lower, upper, ktilde);
        result.wallclock_bp += std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

        result.hvp_count += ktilde;
        result.ktilde_trace.push_back(ktilde);
        result.ul_trace.push_back(traj.ul_values[ktilde - 1]);

        axpy(-config.beta, config.ul_use_sign ? sign(g) : g, delta);
        delta = project(constraint, delta).delta;
        if (!delta.all_finite()) throw NumericalError("non-finite initialization update", t);
    }
    result.delta_final = std::move(delta);
    return result;
}

AttackResult betak(const BetakConfig& config, const AttackLoss& surrogate, const UpperObjective& upper,
                   const PerturbationConstraint& constraint, std::mt19937_64& rng) {
    const SurrogateObjective lower(surrogate, constraint.clean);
    auto result = optimize_initialization(config, lower, upper, constraint, Tensor::zeros_like(constraint.clean));
    result.phi_final = run_attacker(config.final_attacker, surrogate, constraint, result.delta_final, rng);
    const Tensor x = constraint.clean + result.phi_final;
    result.per_model_success["surrogate"] = attack_succeeds(surrogate, x);
    for (std::size_t n = 0; n < upper.size(); ++n) {
        result.per_model_success["pseudo-victim-" + std::to_string(n + 1)] = attack_succeeds(upper.losses()[n], x);
    }
    return result;
}

}  // namespace betak
