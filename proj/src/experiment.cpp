#include <cmath>
#include "betak/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

#include <nlohmann/json.hpp>

#include "betak/errors.hpp"
#include "seeding.hpp"
#include "text_io.hpp"

namespace betak {

const std::vector<RosterEntry>& reference_roster() {
    static const std::vector<RosterEntry> roster = {
        {"surrogate", ModelKind::Mlp, {32}, Activation::Tanh, 1},
        {"pseudo1", ModelKind::Mlp, {48}, Activation::Softplus, 2},
        {"pseudo2", ModelKind::LinearSoftmax, {}, Activation::Tanh, 3},
        {"victim1", ModelKind::LinearSoftmax, {}, Activation::Tanh, 4},
        {"victim2", ModelKind::Mlp, {64}, Activation::Tanh, 5},
        {"victim3", ModelKind::Mlp, {32, 16}, Activation::Softplus, 6},
        {"victim4", ModelKind::Mlp, {40}, Activation::Softplus, 7},
    };
    return roster;
}

ModelZoo train_roster(const std::vector<RosterEntry>& roster, const Dataset& data, std::uint64_t seed,
                      const RosterTraining& opts, std::map<std::string, TrainReport>* reports) {
    data.validate();
    ModelZoo zoo;
    for (const auto& entry : roster) {
        Model model;
        if (entry.kind == ModelKind::LinearSoftmax) {
            model = Model::linear_softmax(data.dim, data.classes);
        } else {
            std::vector<std::size_t> dims{data.dim};
            dims.insert(dims.end(), entry.hidden.begin(), entry.hidden.end());
            dims.push_back(data.classes);
            model = Model::mlp(dims, entry.activation);
        }
        model.initialize(detail::derive_seed(seed, {entry.seed_offset, 0}));
        TrainOptions topts;
        topts.epochs = opts.epochs;
        topts.learning_rate = opts.learning_rate;
        topts.batch_size = opts.batch_size;
        topts.weight_decay = opts.weight_decay;
        topts.standardize_inputs = opts.standardize_inputs;
        topts.seed = detail::derive_seed(seed, {entry.seed_offset, 1});
        if (!(opts.logit_scale > 0.0) || !std::isfinite(opts.logit_scale))
            throw ConfigError("logit scale must be positive");
        TrainReport report;
        if (opts.subsample < 1.0) {
            if (!(opts.subsample > 0.0)) throw ConfigError("subsample fraction must be in (0, 1]");
            std::vector<LabeledSample> subset = data.train;
            std::mt19937_64 rng(detail::derive_seed(seed, {entry.seed_offset, 2}));
            std::shuffle(subset.begin(), subset.end(), rng);
            const auto keep = std::max<std::size_t>(
                1, static_cast<std::size_t>(opts.subsample * static_cast<double>(subset.size())));
            subset.resize(keep);
            model = train(model, subset, topts, &report);
        } else {
            model = train(model, data.train, topts, &report);
        }
        if (opts.logit_scale != 1.0) {
            auto& out = model.mutable_layers().back();
            for (double& w : out.weight) w *= opts.logit_scale;
            for (double& b : out.bias) b *= opts.logit_scale;
        }
        zoo.emplace(entry.id, std::move(model));
        if (reports) (*reports)[entry.id] = report;
    }
    return zoo;
}

void save_zoo(const ModelZoo& zoo, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (const auto& [id, model] : zoo) save_model(model, dir / (id + ".model"));
}

ModelZoo load_zoo(const std::vector<std::string>& ids, const std::filesystem::path& dir) {
    ModelZoo zoo;
    for (const auto& id : ids) {
        const auto path = dir / (id + ".model");
        if (!std::filesystem::exists(path)) {
            throw IoError("missing checkpoint for model '" + id + "' at " + path.string());
        }
        zoo.emplace(id, load_model(path));
    }
    return zoo;
}

AtrEntry evaluate_atr(const Model& model, std::span<const LabeledSample> clean,
                      std::span<const Tensor> adversarial_inputs, std::span<const std::size_t> targets) {
    if (clean.size() != adversarial_inputs.size()) {
        throw InputError("adversarial inputs do not align with clean samples");
    }
    if (!targets.empty() && targets.size() != clean.size()) throw InputError("one target per sample required");
    AtrEntry e;
    for (std::size_t i = 0; i < clean.size(); ++i) {
        if (model.predict(clean[i].features) != clean[i].label) continue;
        ++e.qualifying;
        const auto pred = model.predict(adversarial_inputs[i]);
        const bool success = targets.empty() ? pred != clean[i].label : pred == targets[i];
        e.successes += success ? 1 : 0;
    }
    if (e.qualifying == 0) throw InputError("no clean-correct examples: ATR denominator is empty");
    e.atr = static_cast<double>(e.successes) / static_cast<double>(e.qualifying);
    return e;
}

std::string_view to_string(ModelRole role) {
    switch (role) {
        case ModelRole::Surrogate: return "surrogate";
        case ModelRole::PseudoVictim: return "pseudo-victim";
        case ModelRole::Victim: return "victim";
    }
    return "?";
}

double ExperimentResult::mean_ktilde() const {
    return outer_steps ? static_cast<double>(hvp_count) / static_cast<double>(outer_steps) : 0.0;
}

double ExperimentResult::mean_victim_atr(const std::string& method) const {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& row : rows) {
        if (row.method == method && row.role == ModelRole::Victim) {
            sum += row.entry.atr;
            ++n;
        }
    }
    if (n == 0) throw InputError("no victim rows for method '" + method + "'");
    return sum / static_cast<double>(n);
}

double ExperimentResult::atr(const std::string& method, const std::string& model) const {
    for (const auto& row : rows) {
        if (row.method == method && row.model == model) return row.entry.atr;
    }
    throw InputError("no ATR row for " + method + " / " + model);
}

std::string betak_method_name(const BetakConfig& config) {
    return "betak+" + std::string(to_string(config.final_attacker.kind));
}

namespace {

const Model& find_model(const ModelZoo& zoo, const std::string& id) {
    auto it = zoo.find(id);
    if (it == zoo.end()) throw IoError("model '" + id + "' is not loaded");
    return it->second;
}

struct SampleOutcome {
    std::vector<Tensor> adversarial;  // per method
    std::vector<double> ul_trace;
    std::vector<std::size_t> ktilde_trace;
    std::uint64_t hvp_count = 0;
    double reverse_seconds = 0.0;
};

AttackerSpec baseline_spec(const BetakConfig& config, AttackerKind kind) {
    AttackerSpec spec = config.final_attacker;
    spec.kind = kind;
    spec.use_sign = kind != AttackerKind::SmoothGa;
    return spec;
}

std::mt19937_64 attacker_stream(const BetakConfig& config, std::size_t sample, AttackerKind kind) {
    return std::mt19937_64(detail::derive_seed(config.seed, {sample, static_cast<std::uint64_t>(kind) + 1}));
}

}  // namespace

ExperimentResult run_experiment(const BetakConfig& config, const Dataset& data, const ModelZoo& zoo,
                                std::size_t threads) {
    config.validate();
    data.validate();
    const auto start = std::chrono::steady_clock::now();

    const Model& surrogate = find_model(zoo, config.surrogate_id);
    std::vector<const Model*> pseudo;
    for (const auto& id : config.pseudo_victim_ids) pseudo.push_back(&find_model(zoo, id));
    std::vector<const Model*> victims;
    for (const auto& id : config.victim_ids) victims.push_back(&find_model(zoo, id));
    auto check_dims = [&](const Model& m, const std::string& id) {
        if (m.input_dim() != data.dim || m.classes() != data.classes) {
            throw DimensionError("model '" + id + "' does not match the dataset dimensions");
        }
    };
    check_dims(surrogate, config.surrogate_id);
    for (std::size_t i = 0; i < pseudo.size(); ++i) check_dims(*pseudo[i], config.pseudo_victim_ids[i]);
    for (std::size_t i = 0; i < victims.size(); ++i) check_dims(*victims[i], config.victim_ids[i]);

    std::size_t n = data.eval.size();
    if (config.max_samples > 0) n = std::min(n, config.max_samples);
    if (n == 0) throw InputError("no evaluation samples");
    const std::span<const LabeledSample> samples(data.eval.data(), n);

    std::vector<std::size_t> targets;
    if (config.targeted) {
        for (const auto& s : samples) targets.push_back(config.target_for(s.label, data.classes));
    }

    ExperimentResult result;
    for (auto kind : config.baselines) result.methods.emplace_back(to_string(kind));
    result.methods.push_back(betak_method_name(config));
    result.samples = n;

    for (const auto& [id, model] : zoo) model.audit().reset();

    std::vector<SampleOutcome> outcomes(n);
    auto process = [&](std::size_t i) {
        const auto& s = samples[i];
        PerturbationConstraint constraint{config.epsilon, s.features, config.box_low, config.box_high};
        constraint.validate();
        const auto attack_loss = [&](const Model& m) {
            return config.targeted ? AttackLoss::targeted(m, targets[i]) : AttackLoss::untargeted(m, s.label);
        };
        const auto sur_loss = attack_loss(surrogate);
        SampleOutcome& out = outcomes[i];
        const Tensor zero = Tensor::zeros_like(s.features);
        for (auto kind : config.baselines) {
            auto rng = attacker_stream(config, i, kind);
            const auto phi = run_attacker(baseline_spec(config, kind), sur_loss, constraint, zero, rng);
            out.adversarial.push_back(s.features + phi);
        }
        std::vector<AttackLoss> upper_losses;
        for (const auto* m : pseudo) upper_losses.push_back(attack_loss(*m));
        const UpperObjective upper(std::move(upper_losses), s.features);
        auto rng = attacker_stream(config, i, config.final_attacker.kind);
        auto r = betak(config, sur_loss, upper, constraint, rng);
        out.adversarial.push_back(s.features + r.phi_final);
        out.ul_trace = std::move(r.ul_trace);
        out.ktilde_trace = std::move(r.ktilde_trace);
        out.hvp_count = r.hvp_count;
        out.reverse_seconds = r.wallclock_bp;
    };

    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) process(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < n; i = next++) {
                    try {
                        process(i);
                    } catch (...) {
                        std::lock_guard lock(failure_mutex);
                        if (!failure) failure = std::current_exception();
                        next = n;
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (failure) std::rethrow_exception(failure);
    }

    for (const auto& [id, model] : zoo) result.derivative_queries[id] = model.audit().gradient() + model.audit().hvp();
    for (const auto& id : config.victim_ids) {
        if (result.derivative_queries[id] != 0) {
            throw Error("black-box contract violated: victim '" + id + "' was queried for derivatives");
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        const auto& o = outcomes[i];
        for (std::size_t t = 0; t < o.ktilde_trace.size(); ++t) {
            result.traces.push_back({i, t, o.ktilde_trace[t], o.ul_trace[t]});
        }
        result.hvp_count += o.hvp_count;
        result.outer_steps += o.ktilde_trace.size();
        result.reverse_seconds += o.reverse_seconds;
    }

    struct Evaluated {
        std::string id;
        ModelRole role;
        const Model* model;
    };
    std::vector<Evaluated> evaluated{{config.surrogate_id, ModelRole::Surrogate, &surrogate}};
    for (std::size_t j = 0; j < pseudo.size(); ++j) {
        evaluated.push_back({config.pseudo_victim_ids[j], ModelRole::PseudoVictim, pseudo[j]});
    }
    for (std::size_t j = 0; j < victims.size(); ++j) {
        evaluated.push_back({config.victim_ids[j], ModelRole::Victim, victims[j]});
    }
    for (std::size_t m = 0; m < result.methods.size(); ++m) {
        std::vector<Tensor> adv;
        adv.reserve(n);
        for (const auto& o : outcomes) adv.push_back(o.adversarial[m]);
        for (const auto& e : evaluated) {
            result.rows.push_back({result.methods[m], e.id, e.role, evaluate_atr(*e.model, samples, adv, targets)});
        }
        result.adversarial.emplace(result.methods[m], std::move(adv));
    }
    result.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

void write_results(const ExperimentResult& result, const BetakConfig& config, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    auto num = [](double v) {
        std::string s;
        detail::append_double(s, v);
        return s;
    };
    {
        std::ofstream out(dir / "results.csv");
        if (!out) throw IoError("cannot write results under " + dir.string());
        out << "method,model,role,qualifying,successes,atr\n";
        for (const auto& row : result.rows) {
            out << row.method << ',' << row.model << ',' << to_string(row.role) << ',' << row.entry.qualifying << ','
                << row.entry.successes << ',' << num(row.entry.atr) << '\n';
        }
        for (const auto& method : result.methods) {
            out << method << ",victim-mean,summary,,," << num(result.mean_victim_atr(method)) << '\n';
        }
        out << "# config-fingerprint " << config.fingerprint() << '\n';
    }
    {
        std::ofstream out(dir / "traces.csv");
        if (!out) throw IoError("cannot write traces under " + dir.string());
        out << "sample,outer_step,ktilde,ul_value\n";
        for (const auto& t : result.traces) {
            out << t.sample << ',' << t.outer_step << ',' << t.ktilde << ',' << num(t.ul_value) << '\n';
        }
    }
    nlohmann::json meta;
    meta["config_fingerprint"] = config.fingerprint();
    meta["config"] = config.to_text();
    meta["samples"] = result.samples;
    meta["methods"] = result.methods;
    meta["K"] = config.K;
    meta["T"] = config.T;
    meta["dst_enabled"] = config.dst_enabled;
    meta["mean_ktilde"] = result.mean_ktilde();
    meta["hvp_count"] = result.hvp_count;
    meta["hvp_count_full_unroll"] = result.outer_steps * config.K;
    meta["derivative_queries"] = result.derivative_queries;
    bool victims_clean = true;
    for (const auto& id : config.victim_ids) {
        auto it = result.derivative_queries.find(id);
        victims_clean = victims_clean && (it == result.derivative_queries.end() || it->second == 0);
    }
    meta["victims_never_differentiated"] = victims_clean;
    meta["timing"] = {{"reverse_pass_seconds", result.reverse_seconds},
                      {"total_seconds", result.total_seconds},
                      {"finished_unix", static_cast<std::int64_t>(std::time(nullptr))}};
    std::ofstream out(dir / "run.json");
    if (!out) throw IoError("cannot write run metadata under " + dir.string());
    out << meta.dump(2) << '\n';
}

}  // namespace betak
