// Command-line driver: gen-data, train, attack, eval, landscape, report.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "betak/config.hpp"
#include "betak/dataset.hpp"
#include "betak/errors.hpp"
#include "betak/experiment.hpp"
#include "betak/landscape.hpp"

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

int gen_data(const betak::DatasetSpec& spec, const std::string& out) {
    const auto data = betak::generate_dataset(spec);
    betak::save_dataset(data, std::filesystem::path(out));
    std::cout << "wrote " << data.train.size() << " train / " << data.eval.size() << " eval samples to " << out
              << " (nearest-centroid eval accuracy " << betak::nearest_centroid_accuracy(data) << ")\n";
    return 0;
}

struct TrainArgs {
    std::string dataset;
    std::string out_dir;
    std::string id;
    std::string kind = "mlp";
    std::vector<std::size_t> hidden{32};
    std::string activation = "tanh";
    betak::RosterTraining training;
    std::uint64_t seed = 0;
};

int train_models(const TrainArgs& args) {
    const auto data = betak::load_dataset(std::filesystem::path(args.dataset));
    std::vector<betak::RosterEntry> roster;
    if (args.id.empty()) {
        roster = betak::reference_roster();
    } else {
        roster.push_back({args.id, betak::parse_model_kind(args.kind), args.hidden,
                          betak::parse_activation(args.activation), 0});
    }
    std::map<std::string, betak::TrainReport> reports;
    const auto zoo = betak::train_roster(roster, data, args.seed, args.training, &reports);
    betak::save_zoo(zoo, args.out_dir);
    for (const auto& [id, model] : zoo) {
        std::cout << std::left << std::setw(12) << id << " train-acc " << std::fixed << std::setprecision(4)
                  << reports[id].train_accuracy << "  eval-acc " << betak::accuracy(model, data.eval) << '\n';
    }
    return 0;
}

struct AttackArgs {
    std::string config;
    bool dry_run = false;
    std::size_t threads = 1;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> T;
    std::optional<std::size_t> K;
    std::optional<bool> dst;
    std::optional<std::string> output;
};

int attack(const AttackArgs& args) {
    auto config = betak::load_config(args.config);
    if (args.seed) config.seed = *args.seed;
    if (args.T) config.T = *args.T;
    if (args.K) config.K = *args.K;
    if (args.dst) config.dst_enabled = *args.dst;
    if (args.output) config.output = *args.output;
    config.validate();
    if (args.dry_run) {
        std::cout << "config ok (fingerprint " << config.fingerprint() << ")\n";
        return 0;
    }
    if (config.output.empty()) throw betak::ConfigError("config key 'output' is required for a run");
    const auto data = betak::load_dataset(config.dataset);
    std::vector<std::string> ids{config.surrogate_id};
    ids.insert(ids.end(), config.pseudo_victim_ids.begin(), config.pseudo_victim_ids.end());
    ids.insert(ids.end(), config.victim_ids.begin(), config.victim_ids.end());
    const auto zoo = betak::load_zoo(ids, config.model_dir);
    const auto result = betak::run_experiment(config, data, zoo, args.threads);
    betak::write_results(result, config, config.output);
    for (const auto& [method, adv] : result.adversarial) {
        betak::Dataset out{data.classes, data.dim, {}, {}};
        for (std::size_t i = 0; i < adv.size(); ++i) out.eval.push_back({adv[i], data.eval[i].label});
        betak::save_dataset(out, config.output / ("adv_" + method + ".data"));
    }
    for (const auto& method : result.methods) {
        std::cout << std::left << std::setw(16) << method << " victim-mean ATR " << std::fixed
                  << std::setprecision(4) << result.mean_victim_atr(method) << '\n';
    }
    std::cout << "mean ktilde " << result.mean_ktilde() << " (K=" << config.K << "), hvp count "
              << result.hvp_count << '\n';
    return 0;
}

struct EvalArgs {
    std::string dataset;
    std::string adversarial;
    std::string model_dir;
    std::vector<std::string> models;
    bool targeted = false;
    std::optional<std::size_t> target_label;
};

int eval(const EvalArgs& args) {
    const auto data = betak::load_dataset(std::filesystem::path(args.dataset));
    const auto adv = betak::load_dataset(std::filesystem::path(args.adversarial));
    if (adv.eval.size() > data.eval.size()) throw betak::InputError("more adversarial rows than eval samples");
    const std::span<const betak::LabeledSample> clean(data.eval.data(), adv.eval.size());
    std::vector<betak::Tensor> inputs;
    std::vector<std::size_t> targets;
    betak::BetakConfig tc;
    tc.targeted = args.targeted;
    tc.target_label = args.target_label;
    for (std::size_t i = 0; i < adv.eval.size(); ++i) {
        if (adv.eval[i].label != clean[i].label) throw betak::InputError("adversarial labels do not align");
        inputs.push_back(adv.eval[i].features);
        if (args.targeted) targets.push_back(tc.target_for(clean[i].label, data.classes));
    }
    const auto zoo = betak::load_zoo(args.models, args.model_dir);
    std::cout << "model,qualifying,successes,atr\n";
    for (const auto& id : args.models) {
        const auto e = betak::evaluate_atr(zoo.at(id), clean, inputs, targets);
        std::cout << id << ',' << e.qualifying << ',' << e.successes << ',' << e.atr << '\n';
    }
    return 0;
}

struct LandscapeArgs {
    std::string dataset;
    std::string model_dir;
    std::string model;
    std::string attack_model;
    std::string adversarial;
    std::size_t index = 0;
    double range = 0.5;
    std::size_t resolution = 21;
    std::uint64_t seed = 0;
    std::string out;
};

int landscape(const LandscapeArgs& args) {
    const auto data = betak::load_dataset(std::filesystem::path(args.dataset));
    if (args.index >= data.eval.size()) throw betak::InputError("sample index out of range");
    betak::LabeledSample base = data.eval[args.index];
    if (!args.adversarial.empty()) {
        const auto adv = betak::load_dataset(std::filesystem::path(args.adversarial));
        if (args.index >= adv.eval.size()) throw betak::InputError("sample index out of range for adversarial set");
        base.features = adv.eval[args.index].features;
    }
    const std::string attack_id = args.attack_model.empty() ? args.model : args.attack_model;
    const auto zoo = betak::load_zoo(attack_id == args.model ? std::vector{args.model}
                                                               : std::vector{args.model, attack_id},
                                     args.model_dir);
    const auto iota =
        betak::sign_gradient_direction(betak::AttackLoss::untargeted(zoo.at(attack_id), base.label), base.features);
    const auto o = betak::rademacher_direction(base.features.shape(), args.seed);
    const auto grid = betak::landscape_grid(zoo.at(args.model), base, iota, o, args.range, args.resolution);
    betak::write_landscape(grid, args.out);
    std::cout << "grid " << grid.resolution() << "x" << grid.resolution() << " max " << grid.max << " min "
              << grid.min << '\n';
    return 0;
}

int report(const std::string& dir) {
    const std::filesystem::path root(dir);
    std::ifstream in(root / "results.csv");
    if (!in) throw betak::IoError("cannot open " + (root / "results.csv").string());
    std::string line;
    std::getline(in, line);
    std::map<std::string, std::map<std::string, std::string>> table;
    std::vector<std::string> methods;
    std::vector<std::string> models;
    auto remember = [](std::vector<std::string>& v, const std::string& s) {
        if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
    };
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        if (cells.size() < 6) throw betak::IoError("malformed results row: " + line);
        remember(methods, cells[0]);
        remember(models, cells[1]);
        table[cells[0]][cells[1]] = cells[5];
    }
    std::cout << std::left << std::setw(16) << "method";
    for (const auto& m : models) std::cout << std::setw(13) << m;
    std::cout << '\n';
    for (const auto& method : methods) {
        std::cout << std::setw(16) << method;
        for (const auto& m : models) {
            const auto& v = table[method][m];
            std::cout << std::setw(13) << (v.empty() ? "-" : std::to_string(std::stod(v) * 100.0).substr(0, 6));
        }
        std::cout << '\n';
    }
    std::ifstream meta(root / "run.json");
    if (meta) {
        std::cout << "\nrun metadata: " << (root / "run.json").string() << '\n';
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"BETAK bilevel transfer-attack toolkit"};
    app.require_subcommand(1);

    betak::DatasetSpec spec;
    std::string data_out;
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic Gaussian-cluster dataset");
    gen->add_option("--classes", spec.classes, "number of classes")->capture_default_str();
    gen->add_option("--dim", spec.dim, "feature dimension")->capture_default_str();
    gen->add_option("--train-per-class", spec.train_per_class)->capture_default_str();
    gen->add_option("--eval-per-class", spec.eval_per_class)->capture_default_str();
    gen->add_option("--margin", spec.margin, "distance of class centres from the origin")->capture_default_str();
    gen->add_option("--noise", spec.noise, "per-coordinate noise std")->capture_default_str();
    gen->add_option("--modes", spec.modes_per_class, "cluster centres per class")->capture_default_str();
    gen->add_option("--spread", spec.spread, "raw magnitude mapped to the [0,1] edge (0 = auto)")->capture_default_str();
    gen->add_option("--seed", spec.seed)->capture_default_str();
    gen->add_option("--out", data_out, "output dataset file")->required();

    TrainArgs targs;
    auto* tr = app.add_subcommand("train", "train the reference roster or a single model");
    tr->add_option("--dataset", targs.dataset)->required();
    tr->add_option("--out-dir", targs.out_dir, "checkpoint directory")->required();
    tr->add_option("--id", targs.id, "train a single model with this id instead of the reference roster");
    tr->add_option("--kind", targs.kind, "linear-softmax or mlp")->capture_default_str();
    tr->add_option("--hidden", targs.hidden, "hidden layer widths")->capture_default_str();
    tr->add_option("--activation", targs.activation, "tanh or softplus")->capture_default_str();
    tr->add_option("--epochs", targs.training.epochs)->capture_default_str();
    tr->add_option("--lr", targs.training.learning_rate)->capture_default_str();
    tr->add_option("--batch", targs.training.batch_size)->capture_default_str();
    tr->add_option("--subsample", targs.training.subsample, "fraction of the train split per model")->capture_default_str();
    tr->add_option("--weight-decay", targs.training.weight_decay)->capture_default_str();
    tr->add_option("--logit-scale", targs.training.logit_scale, "multiplier on the trained output layer")
        ->capture_default_str();
    tr->add_option("--seed", targs.seed)->capture_default_str();

    AttackArgs aargs;
    auto* at = app.add_subcommand("attack", "run baselines and BETAK on the eval split");
    at->add_option("--config", aargs.config, "experiment config file")->required();
    at->add_flag("--dry-run", aargs.dry_run, "validate the config and exit");
    at->add_option("--threads", aargs.threads, "worker threads over samples")->capture_default_str();
    at->add_option("--seed", aargs.seed, "override config seed");
    at->add_option("--T", aargs.T, "override outer iterations");
    at->add_option("--K", aargs.K, "override unroll length");
    at->add_option("--dst", aargs.dst, "override dynamic truncation (true/false)");
    at->add_option("--output", aargs.output, "override output directory");

    EvalArgs eargs;
    auto* ev = app.add_subcommand("eval", "ATR of an adversarial set against checkpoints");
    ev->add_option("--dataset", eargs.dataset, "clean dataset")->required();
    ev->add_option("--adversarial", eargs.adversarial, "adversarial set aligned with the eval split")->required();
    ev->add_option("--model-dir", eargs.model_dir)->required();
    ev->add_option("--models", eargs.models)->required();
    ev->add_flag("--targeted", eargs.targeted);
    ev->add_option("--target-label", eargs.target_label);

    LandscapeArgs largs;
    auto* ls = app.add_subcommand("landscape", "loss grid along sign-gradient and random directions");
    ls->add_option("--dataset", largs.dataset)->required();
    ls->add_option("--model-dir", largs.model_dir)->required();
    ls->add_option("--model", largs.model, "model whose loss is plotted")->required();
    ls->add_option("--attack-model", largs.attack_model, "model providing the gradient direction");
    ls->add_option("--adversarial", largs.adversarial, "adversarial set supplying the base point");
    ls->add_option("--index", largs.index)->capture_default_str();
    ls->add_option("--range", largs.range)->capture_default_str();
    ls->add_option("--resolution", largs.resolution)->capture_default_str();
    ls->add_option("--seed", largs.seed)->capture_default_str();
    ls->add_option("--out", largs.out)->required();

    std::string results_dir;
    auto* rp = app.add_subcommand("report", "print the ATR table of a finished run");
    rp->add_option("--results", results_dir, "run output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return kUsageError;
    }

    try {
        if (*gen) return gen_data(spec, data_out);
        if (*tr) return train_models(targs);
        if (*at) return attack(aargs);
        if (*ev) return eval(eargs);
        if (*ls) return landscape(largs);
        if (*rp) return report(results_dir);
    } catch (const betak::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
    return kUsageError;
}
