#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "betak/attack.hpp"
#include "betak/config.hpp"
#include "betak/tensor.hpp"

namespace betak {

/// Scalar function of the perturbation phi.
class PerturbationObjective {
public:
    virtual ~PerturbationObjective() = default;
    virtual double value(const Tensor& phi) const = 0;
    virtual Tensor gradient(const Tensor& phi) const = 0;
};

/// Lower-level objective: needs curvature for the reverse pass.
class LowerObjective : public PerturbationObjective {
public:
    virtual Tensor hvp(const Tensor& phi, const Tensor& v) const = 0;
};

/// f(phi) = -L_sur(clean + phi). Descending f is smooth ascent on the surrogate.
class SurrogateObjective final : public LowerObjective {
public:
    SurrogateObjective(AttackLoss loss, Tensor clean);

    double value(const Tensor& phi) const override;
    Tensor gradient(const Tensor& phi) const override;
    Tensor hvp(const Tensor& phi, const Tensor& v) const override;

private:
    AttackLoss loss_;
    Tensor clean_;
};

/// F(phi) = -(1/N) sum_n L_vic_n(clean + phi) over the pseudo-victims.
class UpperObjective final : public PerturbationObjective {
public:
    UpperObjective(std::vector<AttackLoss> pseudo_victims, Tensor clean);

    std::size_t size() const noexcept { return victims_.size(); }
    const std::vector<AttackLoss>& losses() const noexcept { return victims_; }
    double value(const Tensor& phi) const override;
    Tensor gradient(const Tensor& phi) const override;

private:
    std::vector<AttackLoss> victims_;
    Tensor clean_;
};

/// Recorded unrolled lower-level dynamics phi_0..phi_K.
struct Trajectory {
    std::vector<Tensor> phi;         // K + 1 iterates, phi[0] = delta
    std::vector<Tensor> masks;       // masks[k] from the projection producing phi[k + 1]
    std::vector<double> ul_values;   // ul_values[k - 1] = F(phi[k])
    double ll_step_size = 0.0;

    std::size_t steps() const noexcept { return masks.size(); }
};

/// phi_{k+1} = project(phi_k - alpha * grad f(phi_k)), recording masks and F(phi_k).
Trajectory unroll(const LowerObjective& lower, const PerturbationConstraint& constraint, const Tensor& delta,
                  std::size_t steps, double alpha, const PerturbationObjective& upper);

/// Smallest k in [1, K] maximizing F(phi_k).
std::size_t dst_select(const Trajectory& traj);

/// Gradient of delta -> F(phi_ktilde(delta)) by reverse recursion through the
/// recorded trajectory. Uses exactly `ktilde` lower-level HVPs.
Tensor hgr(const Trajectory& traj, const LowerObjective& lower, const PerturbationObjective& upper,
           std::size_t ktilde);

struct AttackResult {
    Tensor delta_final;
    Tensor phi_final;
    /// Keys "surrogate" and "pseudo-victim-<n>" (n from 1), judged at phi_final.
    std::map<std::string, bool> per_model_success;
    std::vector<double> ul_trace;          // F(phi_ktilde) per outer step
    std::vector<std::size_t> ktilde_trace;
    std::uint64_t hvp_count = 0;
    double wallclock_bp = 0.0;             // seconds spent in reverse passes
};

/// Outer loop over the initialization delta, then the configured final attacker from delta^T.
AttackResult betak(const BetakConfig& config, const AttackLoss& surrogate, const UpperObjective& upper,
                   const PerturbationConstraint& constraint, std::mt19937_64& rng);

/// Outer loop only, for arbitrary objectives. Fills every field except phi_final.
AttackResult optimize_initialization(const BetakConfig& config, const LowerObjective& lower,
                                     const PerturbationObjective& upper, const PerturbationConstraint& constraint,
                                     const Tensor& delta0);

}  // namespace betak
