#include "betak/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <string>

#include "betak/errors.hpp"
#include "text_io.hpp"

namespace betak {

void Dataset::validate() const {
    if (classes < 2 || dim < 1) throw InputError("dataset needs at least two classes and one feature");
    for (const auto* split : {&train, &eval}) {
        for (const auto& s : *split) {
            if (s.features.size() != dim) throw DimensionError("dataset sample has wrong feature count");
            if (s.label >= classes) throw InputError("dataset label out of range");
            for (double v : s.features.values()) {
                if (!(v >= 0.0 && v <= 1.0)) throw InputError("dataset feature outside [0,1]");
            }
        }
    }
}

bool operator==(const Dataset& a, const Dataset& b) {
    auto same = [](const std::vector<LabeledSample>& x, const std::vector<LabeledSample>& y) {
        return std::equal(x.begin(), x.end(), y.begin(), y.end(), [](const auto& p, const auto& q) {
            return p.label == q.label && p.features == q.features;
        });
    };
    return a.classes == b.classes && a.dim == b.dim && same(a.train, b.train) && same(a.eval, b.eval);
}

void DatasetSpec::validate() const {
    if (classes < 2) throw ConfigError("dataset needs at least 2 classes");
    if (dim < 2) throw ConfigError("dataset dimension must be at least 2");
    if (train_per_class == 0) throw ConfigError("train_per_class must be positive");
    if (modes_per_class == 0) throw ConfigError("modes_per_class must be positive");
    if (!(margin >= 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be non-negative");
    if (!(noise >= 0.0) || !std::isfinite(noise)) throw ConfigError("noise must be non-negative");
    if (!(spread >= 0.0) || !std::isfinite(spread)) throw ConfigError("spread must be non-negative");
    if (margin == 0.0 && noise == 0.0) throw ConfigError("margin and noise are both zero");
}

Dataset generate_dataset(const DatasetSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<std::vector<std::vector<double>>> centres(spec.classes);
    for (auto& modes : centres) {
        for (std::size_t m = 0; m < spec.modes_per_class; ++m) {
            std::vector<double> c(spec.dim);
            double n2 = 0.0;
            for (auto& v : c) {
                v = gauss(rng);
                n2 += v * v;
            }
            const double scale = spec.margin / std::sqrt(n2);
            for (auto& v : c) v *= scale;
            modes.push_back(std::move(c));
        }
    }

    struct Raw {
        std::vector<double> x;
        std::size_t label;
    };
    auto draw = [&](std::size_t per_class) {
        std::vector<Raw> out;
        for (std::size_t i = 0; i < per_class; ++i) {
            for (std::size_t c = 0; c < spec.classes; ++c) {
                const auto& centre = centres[c][i % spec.modes_per_class];
                Raw r{centre, c};
                for (auto& v : r.x) v += spec.noise * gauss(rng);
                out.push_back(std::move(r));
            }
        }
        return out;
    };
    auto train_raw = draw(spec.train_per_class);
    auto eval_raw = draw(spec.eval_per_class);

    double bound = spec.spread;
    if (bound == 0.0) {
        for (const auto* split : {&train_raw, &eval_raw}) {
            for (const auto& r : *split) {
                for (double v : r.x) bound = std::max(bound, std::abs(v));
            }
        }
        if (bound == 0.0) bound = 1.0;
    }
    auto normalize = [&](std::vector<Raw>& raw) {
        std::vector<LabeledSample> out;
        out.reserve(raw.size());
        for (auto& r : raw) {
            for (auto& v : r.x) v = std::clamp(0.5 + 0.5 * v / bound, 0.0, 1.0);
            out.push_back({Tensor::vector(std::move(r.x)), r.label});
        }
        return out;
    };

    Dataset d;
    d.classes = spec.classes;
    d.dim = spec.dim;
    d.train = normalize(train_raw);
    d.eval = normalize(eval_raw);
    return d;
}

namespace {

constexpr std::string_view kMagic = "betak-dataset";
constexpr int kVersion = 1;

std::size_t header_value(std::istream& in, std::string_view key) {
    const auto line = detail::next_line(in, "dataset header");
    const auto parts = detail::split(detail::trim(line), ' ');
    if (parts.size() != 2 || parts[0] != key) {
        throw IoError("dataset header: expected '" + std::string(key) + " <n>', got '" + line + "'");
    }
    return detail::parse_uint(parts[1], "dataset header");
}

}  // namespace

void save_dataset(const Dataset& data, std::ostream& out) {
    out << kMagic << ' ' << kVersion << '\n'
        << "classes " << data.classes << '\n'
        << "dim " << data.dim << '\n'
        << "train " << data.train.size() << '\n'
        << "eval " << data.eval.size() << '\n';
    std::string row;
    for (const auto& [name, split] : {std::pair{"train", &data.train}, std::pair{"eval", &data.eval}}) {
        for (const auto& s : *split) {
            row.clear();
            row += name;
            row += ',';
            row += std::to_string(s.label);
            for (double v : s.features.values()) {
                row += ',';
                detail::append_double(row, v);
            }
            out << row << '\n';
        }
    }
    if (!out) throw IoError("dataset: write failed");
}

Dataset load_dataset(std::istream& in) {
    const auto header = detail::next_line(in, "dataset");
    const auto head = detail::split(detail::trim(header), ' ');
    if (head.size() != 2 || head[0] != kMagic) throw IoError("dataset: bad magic line");
    if (detail::parse_uint(head[1], "dataset version") != kVersion) {
        throw IoError("dataset: unsupported version " + std::string(head[1]));
    }
    Dataset d;
    d.classes = header_value(in, "classes");
    d.dim = header_value(in, "dim");
    const auto n_train = header_value(in, "train");
    const auto n_eval = header_value(in, "eval");
    for (std::size_t i = 0; i < n_train + n_eval; ++i) {
        const auto line = detail::next_line(in, "dataset rows");
        const auto cells = detail::split(detail::trim(line), ',');
        if (cells.size() != d.dim + 2) {
            throw IoError("dataset row " + std::to_string(i) + ": expected " + std::to_string(d.dim + 2) +
                          " cells, got " + std::to_string(cells.size()));
        }
        const std::string_view expected = i < n_train ? "train" : "eval";
        if (cells[0] != expected) throw IoError("dataset row " + std::to_string(i) + ": split out of order");
        LabeledSample s;
        s.label = detail::parse_uint(cells[1], "dataset label");
        std::vector<double> f(d.dim);
        for (std::size_t j = 0; j < d.dim; ++j) f[j] = detail::parse_double(cells[j + 2], "dataset feature");
        s.features = Tensor::vector(std::move(f));
        (i < n_train ? d.train : d.eval).push_back(std::move(s));
    }
    try {
        d.validate();
    } catch (const Error& e) {
        throw IoError(std::string("dataset: ") + e.what());
    }
    return d;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    save_dataset(data, out);
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
    return load_dataset(in);
}

double nearest_centroid_accuracy(const Dataset& data) {
    if (data.eval.empty()) throw InputError("dataset has no eval split");
    std::vector<std::vector<double>> mean(data.classes, std::vector<double>(data.dim, 0.0));
    std::vector<std::size_t> count(data.classes, 0);
    for (const auto& s : data.train) {
        for (std::size_t j = 0; j < data.dim; ++j) mean[s.label][j] += s.features[j];
        ++count[s.label];
    }
    for (std::size_t c = 0; c < data.classes; ++c) {
        if (count[c] == 0) continue;
        for (auto& v : mean[c]) v /= static_cast<double>(count[c]);
    }
    std::size_t correct = 0;
    for (const auto& s : data.eval) {
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < data.classes; ++c) {
            if (count[c] == 0) continue;
            double d2 = 0.0;
            for (std::size_t j = 0; j < data.dim; ++j) {
                const double diff = s.features[j] - mean[c][j];
                d2 += diff * diff;
            }
            if (d2 < best_d) {
                best_d = d2;
                best = c;
            }
        }
        correct += best == s.label ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(data.eval.size());
}

}  // namespace betak
