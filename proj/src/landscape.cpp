#include "betak/landscape.hpp"

#include <fstream>
#include <random>

#include "betak/errors.hpp"
#include "text_io.hpp"

namespace betak {

Tensor sign_gradient_direction(const AttackLoss& loss, const Tensor& u) { return sign(loss.gradient(u)); }

Tensor rademacher_direction(const std::vector<std::size_t>& shape, std::uint64_t seed) {
    Tensor t(shape);
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(0.5);
    for (auto& v : t.values()) v = coin(rng) ? 1.0 : -1.0;
    return t;
}

LandscapeGrid landscape_grid(const Model& model, const LabeledSample& base, const Tensor& iota, const Tensor& o,
                             double range, std::size_t resolution, LossKind kind) {
    require_same_shape(iota, base.features, "landscape direction iota");
    require_same_shape(o, base.features, "landscape direction o");
    if (resolution == 0) throw ConfigError("landscape resolution must be positive");
    if (!(range >= 0.0)) throw ConfigError("landscape range must be non-negative");

    LandscapeGrid grid;
    grid.coords.resize(resolution, 0.0);
    if (resolution > 1) {
        const double span = static_cast<double>(resolution - 1);
        for (std::size_t i = 0; i < resolution; ++i) {
            grid.coords[i] = range * (2.0 * static_cast<double>(i) - span) / span;
        }
    }
    grid.values.resize(resolution * resolution);
    for (std::size_t row = 0; row < resolution; ++row) {
        for (std::size_t col = 0; col < resolution; ++col) {
            Tensor x = base.features;
            axpy(grid.coords[col], iota, x);
            axpy(grid.coords[row], o, x);
            grid.values[row * resolution + col] = model.loss(x, base.label, kind);
        }
    }
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        if (grid.values[i] > grid.values[grid.argmax]) grid.argmax = i;
        if (grid.values[i] < grid.values[grid.argmin]) grid.argmin = i;
    }
    grid.max = grid.values[grid.argmax];
    grid.min = grid.values[grid.argmin];
    return grid;
}

void write_landscape(const LandscapeGrid& grid, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    const std::size_t n = grid.resolution();
    std::string line;
    out << "row,col,x,y,loss\n";
    for (std::size_t i = 0; i < grid.values.size(); ++i) {
        const std::size_t row = i / n;
        const std::size_t col = i % n;
        line = std::to_string(row) + ',' + std::to_string(col) + ',';
        detail::append_double(line, grid.coords[col]);
        line += ',';
        detail::append_double(line, grid.coords[row]);
        line += ',';
        detail::append_double(line, grid.values[i]);
        out << line << '\n';
    }
    auto mark = [&](const char* tag, std::size_t idx, double v) {
        line = std::string("# ") + tag + " x=";
        detail::append_double(line, grid.coords[idx % n]);
        line += " y=";
        detail::append_double(line, grid.coords[idx / n]);
        line += " loss=";
        detail::append_double(line, v);
        out << line << '\n';
    };
    mark("max", grid.argmax, grid.max);
    mark("min", grid.argmin, grid.min);
}

}  // namespace betak
