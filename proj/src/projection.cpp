#include <cmath>
#include <limits>
#include <string>

#include "betak/attack.hpp"
#include "betak/errors.hpp"

namespace betak {

void PerturbationConstraint::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
        throw ConfigError("epsilon must be positive and finite");
    }
    if (!(box_low < box_high)) throw ConfigError("box_low must be below box_high");
    if (clean.empty()) throw ConfigError("constraint has no clean input");
    for (double v : clean.values()) {
        if (v < box_low || v > box_high) throw InputError("clean input lies outside the box");
    }
}

Projection project(const PerturbationConstraint& constraint, const Tensor& delta) {
    if (!(constraint.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    require_same_shape(delta, constraint.clean, "project");
    const double eps = constraint.epsilon;
    Projection out{delta, Tensor(delta.shape(), 1.0)};
    for (std::size_t i = 0; i < delta.size(); ++i) {
        double d = delta[i];
        bool clipped = false;
        if (d > eps) {
            d = eps;
            clipped = true;
        } else if (d < -eps) {
            d = -eps;
            clipped = true;
        }
        const double u = constraint.clean[i];
        if (u + d > constraint.box_high) {
            d = constraint.box_high - u;
            while (u + d > constraint.box_high) d = std::nextafter(d, -std::numeric_limits<double>::infinity());
            clipped = true;
        } else if (u + d < constraint.box_low) {
            d = constraint.box_low - u;
            while (u + d < constraint.box_low) d = std::nextafter(d, std::numeric_limits<double>::infinity());
            clipped = true;
        }
        out.delta[i] = d;
        if (clipped) out.mask[i] = 0.0;
    }
    return out;
}

bool is_feasible(const PerturbationConstraint& constraint, const Tensor& delta) {
    if (!delta.same_shape(constraint.clean)) return false;
    for (std::size_t i = 0; i < delta.size(); ++i) {
        const double d = delta[i];
        const double x = constraint.clean[i] + d;
        if (!(std::abs(d) <= constraint.epsilon) || x < constraint.box_low || x > constraint.box_high) return false;
    }
    return true;
}

}  // namespace betak
