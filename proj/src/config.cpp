#include "betak/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "betak/errors.hpp"
#include "text_io.hpp"

namespace betak {

BetakConfig BetakConfig::untargeted_defaults() { return BetakConfig{}; }

BetakConfig BetakConfig::targeted_defaults() {
    BetakConfig c;
    c.targeted = true;
    c.T = 300;
    c.epsilon = 16.0 / 255.0;
    c.beta = 16.0 / 255.0;
    c.final_attacker = AttackerSpec::baseline(AttackerKind::Pgd, c.epsilon, c.K);
    return c;
}

void BetakConfig::validate() const {
    if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw ConfigError("epsilon must be positive");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be positive");
    if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
    if (K < 1) throw ConfigError("K must be at least 1");
    if (!(box_low < box_high)) throw ConfigError("box_low must be below box_high");
    if (!targeted && target_label) throw ConfigError("target_label set on an untargeted run");
    final_attacker.validate();
    if (surrogate_id.empty()) throw ConfigError("surrogate id is empty");
    if (pseudo_victim_ids.empty()) throw ConfigError("at least one pseudo-victim is required");
    const std::set<std::string> victims(victim_ids.begin(), victim_ids.end());
    if (victims.size() != victim_ids.size()) throw ConfigError("duplicate victim id");
    if (victims.count(surrogate_id)) throw ConfigError("surrogate '" + surrogate_id + "' is also a held-out victim");
    for (const auto& id : pseudo_victim_ids) {
        if (id.empty()) throw ConfigError("empty pseudo-victim id");
        if (victims.count(id)) throw ConfigError("pseudo-victim '" + id + "' is also a held-out victim");
    }
}

std::size_t BetakConfig::target_for(std::size_t label, std::size_t classes) const {
    if (target_label) {
        if (*target_label >= classes) throw ConfigError("target_label out of range");
        return *target_label;
    }
    return (label + 1) % classes;
}

namespace {

std::string join(const std::vector<std::string>& items) {
    std::string s;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) s += ",";
        s += items[i];
    }
    return s;
}

std::string real(double v) {
    std::string s;
    detail::append_double(s, v);
    return s;
}

const std::vector<std::string>& known_keys() {
    static const std::vector<std::string> keys = {
        "epsilon", "alpha", "beta", "K", "T", "dst_enabled", "ul_use_sign", "targeted", "target_label",
        "final_attacker", "final_steps", "final_step_size", "final_momentum_decay", "final_variance_samples",
        "final_variance_bound", "baselines", "surrogate", "pseudo_victims", "victims", "seed", "box_low",
        "box_high", "max_samples", "dataset", "model_dir", "output"};
    return keys;
}

double parse_real(std::string_view key, std::string_view value) {
    const auto slash = value.find('/');
    const std::string context = "config key '" + std::string(key) + "'";
    try {
        if (slash == std::string_view::npos) return detail::parse_double(value, context);
        const double num = detail::parse_double(detail::trim(value.substr(0, slash)), context);
        const double den = detail::parse_double(detail::trim(value.substr(slash + 1)), context);
        if (den == 0.0) throw ConfigError(context + ": division by zero");
        return num / den;
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
}

std::size_t parse_count(std::string_view key, std::string_view value) {
    try {
        return detail::parse_uint(value, "config key '" + std::string(key) + "'");
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
}

bool parse_bool(std::string_view key, std::string_view value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config key '" + std::string(key) + "': expected true or false");
}

std::vector<std::string> parse_list(std::string_view value) {
    std::vector<std::string> out;
    if (value.empty()) return out;
    for (auto item : detail::split(value, ',')) {
        const auto t = detail::trim(item);
        if (t.empty()) throw ConfigError("empty entry in list '" + std::string(value) + "'");
        out.emplace_back(t);
    }
    return out;
}

}  // namespace

std::string BetakConfig::to_text() const {
    std::ostringstream out;
    std::vector<std::string> baseline_names;
    for (auto kind : baselines) baseline_names.emplace_back(to_string(kind));
    out << "epsilon = " << real(epsilon) << '\n'
        << "alpha = " << real(alpha) << '\n'
        << "beta = " << real(beta) << '\n'
        << "K = " << K << '\n'
        << "T = " << T << '\n'
        << "dst_enabled = " << (dst_enabled ? "true" : "false") << '\n'
        << "ul_use_sign = " << (ul_use_sign ? "true" : "false") << '\n'
        << "targeted = " << (targeted ? "true" : "false") << '\n'
        << "target_label = " << (target_label ? std::to_string(*target_label) : std::string("auto")) << '\n'
        << "final_attacker = " << to_string(final_attacker.kind) << '\n'
        << "final_steps = " << final_attacker.steps << '\n'
        << "final_step_size = " << real(final_attacker.step_size) << '\n'
        << "final_momentum_decay = " << real(final_attacker.momentum_decay) << '\n'
        << "final_variance_samples = " << final_attacker.variance_samples << '\n'
        << "final_variance_bound = " << real(final_attacker.variance_bound) << '\n'
        << "baselines = " << join(baseline_names) << '\n'
        << "surrogate = " << surrogate_id << '\n'
        << "pseudo_victims = " << join(pseudo_victim_ids) << '\n'
        << "victims = " << join(victim_ids) << '\n'
        << "seed = " << seed << '\n'
        << "box_low = " << real(box_low) << '\n'
        << "box_high = " << real(box_high) << '\n'
        << "max_samples = " << max_samples << '\n'
        << "dataset = " << dataset.string() << '\n'
        << "model_dir = " << model_dir.string() << '\n'
        << "output = " << output.string() << '\n';
    return out.str();
}

std::string BetakConfig::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : to_text()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

BetakConfig parse_config(std::istream& in) {
    std::map<std::string, std::string> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto body = detail::trim(line);
        if (body.empty() || body.front() == '#') continue;
        const auto eq = body.find('=');
        if (eq == std::string_view::npos) {
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        }
        const std::string key(detail::trim(body.substr(0, eq)));
        const std::string value(detail::trim(body.substr(eq + 1)));
        const auto& keys = known_keys();
        if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        }
        if (!entries.emplace(key, value).second) {
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        }
    }

    BetakConfig c;
    auto get = [&](const char* key) -> const std::string* {
        auto it = entries.find(key);
        return it == entries.end() ? nullptr : &it->second;
    };
    if (auto v = get("epsilon")) c.epsilon = parse_real("epsilon", *v);
    if (auto v = get("alpha")) c.alpha = parse_real("alpha", *v);
    if (auto v = get("beta")) c.beta = parse_real("beta", *v);
    if (auto v = get("K")) c.K = parse_count("K", *v);
    if (auto v = get("T")) c.T = parse_count("T", *v);
    if (auto v = get("dst_enabled")) c.dst_enabled = parse_bool("dst_enabled", *v);
    if (auto v = get("ul_use_sign")) c.ul_use_sign = parse_bool("ul_use_sign", *v);
    if (auto v = get("targeted")) c.targeted = parse_bool("targeted", *v);
    if (auto v = get("target_label"); v && *v != "auto") c.target_label = parse_count("target_label", *v);

    AttackerSpec& fa = c.final_attacker;
    if (auto v = get("final_attacker")) fa.kind = parse_attacker_kind(*v);
    fa.steps = c.K;
    if (auto v = get("final_steps")) fa.steps = parse_count("final_steps", *v);
    fa.use_sign = fa.kind != AttackerKind::SmoothGa;
    if (fa.steps == 0) throw ConfigError("final_steps must be at least 1");
    fa.step_size = c.epsilon / static_cast<double>(fa.steps) * 2.5;
    if (auto v = get("final_step_size")) fa.step_size = parse_real("final_step_size", *v);
    if (auto v = get("final_momentum_decay")) fa.momentum_decay = parse_real("final_momentum_decay", *v);
    if (auto v = get("final_variance_samples")) fa.variance_samples = parse_count("final_variance_samples", *v);
    if (auto v = get("final_variance_bound")) fa.variance_bound = parse_real("final_variance_bound", *v);

    if (auto v = get("baselines")) {
        c.baselines.clear();
        for (const auto& name : parse_list(*v)) c.baselines.push_back(parse_attacker_kind(name));
    }
    if (auto v = get("surrogate")) c.surrogate_id = *v;
    if (auto v = get("pseudo_victims")) c.pseudo_victim_ids = parse_list(*v);
    if (auto v = get("victims")) c.victim_ids = parse_list(*v);
    if (auto v = get("seed")) c.seed = parse_count("seed", *v);
    if (auto v = get("box_low")) c.box_low = parse_real("box_low", *v);
    if (auto v = get("box_high")) c.box_high = parse_real("box_high", *v);
    if (auto v = get("max_samples")) c.max_samples = parse_count("max_samples", *v);
    if (auto v = get("dataset")) c.dataset = *v;
    if (auto v = get("model_dir")) c.model_dir = *v;
    if (auto v = get("output")) c.output = *v;
    c.validate();
    return c;
}

BetakConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    auto c = parse_config(in);
    // Relative paths resolve against the config file's directory.
    const auto base = path.parent_path();
    for (auto* p : {&c.dataset, &c.model_dir, &c.output}) {
        if (!p->empty() && p->is_relative()) *p = base / *p;
    }
    return c;
}

void save_config(const BetakConfig& config, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << config.to_text();
}

}  // namespace betak
