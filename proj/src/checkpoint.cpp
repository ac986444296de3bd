#include <fstream>
#include <sstream>
#include <string>

#include "betak/errors.hpp"
#include "betak/model.hpp"
#include "text_io.hpp"

// Checkpoint layout (text, one record per line):
//   betak-model 1
//   kind <linear-softmax|mlp>
//   activation <tanh|softplus>
//   layers <count>
//   layer <in> <out>        -- repeated per layer, followed by
//   <weights, row-major>    -- space separated, shortest round-trip decimal
//   <bias>
//   end

namespace betak {

namespace {

constexpr std::string_view kMagic = "betak-model";
constexpr int kVersion = 1;

void write_row(std::ostream& out, const std::vector<double>& values) {
    std::string line;
    line.reserve(values.size() * 24);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) line += ' ';
        detail::append_double(line, values[i]);
    }
    out << line << '\n';
}

std::vector<double> read_row(std::istream& in, std::size_t expected, std::string_view what) {
    const auto line = detail::next_line(in, what);
    std::vector<double> values;
    values.reserve(expected);
    for (auto tok : detail::split(detail::trim(line), ' ')) values.push_back(detail::parse_double(tok, what));
    if (values.size() != expected) {
        throw IoError(std::string(what) + ": expected " + std::to_string(expected) + " values, got " +
                      std::to_string(values.size()));
    }
    return values;
}

std::string expect_field(std::istream& in, std::string_view key) {
    const auto line = detail::next_line(in, "model checkpoint");
    const auto parts = detail::split(detail::trim(line), ' ');
    if (parts.size() != 2 || parts[0] != key) {
        throw IoError("model checkpoint: expected '" + std::string(key) + " <value>', got '" + line + "'");
    }
    return std::string(parts[1]);
}

}  // namespace

void save_model(const Model& model, std::ostream& out) {
    out << kMagic << ' ' << kVersion << '\n';
    out << "kind " << to_string(model.kind()) << '\n';
    out << "activation " << to_string(model.activation()) << '\n';
    out << "layers " << model.layers().size() << '\n';
    for (const auto& layer : model.layers()) {
        out << "layer " << layer.in << ' ' << layer.out << '\n';
        write_row(out, layer.weight);
        write_row(out, layer.bias);
    }
    out << "end\n";
    if (!out) throw IoError("model checkpoint: write failed");
}

Model load_model(std::istream& in) {
    const auto header = detail::next_line(in, "model checkpoint");
    const auto head = detail::split(detail::trim(header), ' ');
    if (head.size() != 2 || head[0] != kMagic) throw IoError("model checkpoint: bad magic line");
    if (detail::parse_uint(head[1], "model checkpoint version") != kVersion) {
        throw IoError("model checkpoint: unsupported version " + std::string(head[1]));
    }
    ModelKind kind;
    Activation act;
    try {
        kind = parse_model_kind(expect_field(in, "kind"));
        act = parse_activation(expect_field(in, "activation"));
    } catch (const ConfigError& e) {
        throw IoError(std::string("model checkpoint: ") + e.what());
    }
    const auto count = detail::parse_uint(expect_field(in, "layers"), "layer count");
    std::vector<DenseLayer> layers;
    for (std::uint64_t l = 0; l < count; ++l) {
        const auto line = detail::next_line(in, "model checkpoint");
        const auto parts = detail::split(detail::trim(line), ' ');
        if (parts.size() != 3 || parts[0] != "layer") throw IoError("model checkpoint: bad layer header");
        DenseLayer layer;
        layer.in = detail::parse_uint(parts[1], "layer input size");
        layer.out = detail::parse_uint(parts[2], "layer output size");
        layer.weight = read_row(in, layer.in * layer.out, "layer weights");
        layer.bias = read_row(in, layer.out, "layer bias");
        layers.push_back(std::move(layer));
    }
    if (detail::trim(detail::next_line(in, "model checkpoint")) != "end") {
        throw IoError("model checkpoint: missing end marker");
    }
    try {
        return Model::from_layers(kind, act, std::move(layers));
    } catch (const DimensionError& e) {
        throw IoError(std::string("model checkpoint: ") + e.what());
    }
}

void save_model(const Model& model, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    save_model(model, out);
}

Model load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open model checkpoint '" + path.string() + "'");
    return load_model(in);
}

}  // namespace betak
