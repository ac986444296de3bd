#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "betak/bilevel.hpp"
#include "betak/config.hpp"
#include "betak/dataset.hpp"
#include "betak/model.hpp"

namespace betak {

using ModelZoo = std::map<std::string, Model>;

struct RosterEntry {
    std::string id;
    ModelKind kind;
    std::vector<std::size_t> hidden;
    Activation activation;
    std::uint64_t seed_offset;
};

/// Desk-scale roster: one surrogate, two pseudo-victims, four held-out victims.
const std::vector<RosterEntry>& reference_roster();

struct RosterTraining {
    std::size_t epochs = 100;
    double learning_rate = 0.2;
    std::size_t batch_size = 32;
    double weight_decay = 0.0;
    bool standardize_inputs = true;
    /// Fraction of the train split each model sees (drawn per model without
    /// replacement). 1 trains every model on the whole split.
    double subsample = 0.4;
    /// Multiplies the trained output layer. Predictions are unchanged; values
    /// above 1 sharpen the softmax so clean points sit deep inside their class.
    double logit_scale = 6.0;
};

/// Trains every roster entry on the train split; model seeds derive from `seed`.
ModelZoo train_roster(const std::vector<RosterEntry>& roster, const Dataset& data, std::uint64_t seed,
                      const RosterTraining& opts = {}, std::map<std::string, TrainReport>* reports = nullptr);

void save_zoo(const ModelZoo& zoo, const std::filesystem::path& dir);
/// Loads `<dir>/<id>.model` for each id; a missing file names the model.
ModelZoo load_zoo(const std::vector<std::string>& ids, const std::filesystem::path& dir);

struct AtrEntry {
    std::size_t qualifying = 0;
    std::size_t successes = 0;
    double atr = 0.0;
};

/// ATR of `model` over the examples it classifies correctly when clean.
/// `targets` is empty for untargeted attacks, otherwise one target per sample.
AtrEntry evaluate_atr(const Model& model, std::span<const LabeledSample> clean,
                      std::span<const Tensor> adversarial_inputs, std::span<const std::size_t> targets);

enum class ModelRole { Surrogate, PseudoVictim, Victim };
std::string_view to_string(ModelRole role);

struct AtrRow {
    std::string method;
    std::string model;
    ModelRole role;
    AtrEntry entry;
};

struct TraceRow {
    std::size_t sample = 0;
    std::size_t outer_step = 0;
    std::size_t ktilde = 0;
    double ul_value = 0.0;
};

struct ExperimentResult {
    std::vector<std::string> methods;   // baselines first, BETAK last
    std::vector<AtrRow> rows;
    std::vector<TraceRow> traces;
    std::uint64_t hvp_count = 0;
    std::uint64_t outer_steps = 0;
    double reverse_seconds = 0.0;
    double total_seconds = 0.0;
    /// gradient + HVP queries per model during perturbation crafting.
    std::map<std::string, std::uint64_t> derivative_queries;
    /// Adversarial inputs per method, aligned with the evaluated samples.
    std::map<std::string, std::vector<Tensor>> adversarial;
    std::size_t samples = 0;

    double mean_ktilde() const;
    /// Mean ATR over the held-out victims for `method`.
    double mean_victim_atr(const std::string& method) const;
    double atr(const std::string& method, const std::string& model) const;
};

std::string betak_method_name(const BetakConfig& config);

/// Runs the baselines and BETAK on each eval sample. Parallel over samples;
/// the result does not depend on `threads`.
ExperimentResult run_experiment(const BetakConfig& config, const Dataset& data, const ModelZoo& zoo,
                                std::size_t threads = 1);

/// Writes results.csv, traces.csv and run.json under `dir`.
void write_results(const ExperimentResult& result, const BetakConfig& config, const std::filesystem::path& dir);

}  // namespace betak
