#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "betak/attack.hpp"
#include "betak/model.hpp"

namespace betak {

/// Loss of `model` on u + x * iota + y * o over a square grid.
struct LandscapeGrid {
    std::vector<double> coords;   // shared by both axes
    std::vector<double> values;   // values[row * n + col], row indexes y, col indexes x
    double max = 0.0;
    double min = 0.0;
    std::size_t argmax = 0;
    std::size_t argmin = 0;

    std::size_t resolution() const noexcept { return coords.size(); }
    double at(std::size_t row, std::size_t col) const { return values[row * coords.size() + col]; }
};

/// sgn of the attack-loss gradient at u.
Tensor sign_gradient_direction(const AttackLoss& loss, const Tensor& u);
/// Entries +1 or -1 with equal probability.
Tensor rademacher_direction(const std::vector<std::size_t>& shape, std::uint64_t seed);

/// Coordinates are range * (2i - (n-1)) / (n-1); resolution 1 is the origin only.
LandscapeGrid landscape_grid(const Model& model, const LabeledSample& base, const Tensor& iota, const Tensor& o,
                             double range, std::size_t resolution, LossKind kind = LossKind::CrossEntropy);

/// Long-format CSV (row,col,x,y,loss) followed by `# max`/`# min` comment lines.
void write_landscape(const LandscapeGrid& grid, const std::filesystem::path& path);

}  // namespace betak
