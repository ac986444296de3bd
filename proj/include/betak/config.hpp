#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "betak/attack.hpp"

namespace betak {

/// Every knob of one transfer-attack experiment.
///
/// Stored on disk as flat `key = value` text; see `parse_config` for the keys.
/// Reals accept fractions such as `8/255`.
struct BetakConfig {
    double epsilon = 8.0 / 255.0;
    double alpha = 2.0;
    double beta = 1.6 / 255.0;
    std::size_t K = 10;
    std::size_t T = 10;
    bool dst_enabled = true;
    bool ul_use_sign = true;
    bool targeted = false;
    std::optional<std::size_t> target_label;
    AttackerSpec final_attacker = AttackerSpec::baseline(AttackerKind::Pgd, 8.0 / 255.0, 10);
    std::vector<AttackerKind> baselines{AttackerKind::Pgd};
    std::string surrogate_id = "surrogate";
    std::vector<std::string> pseudo_victim_ids{"pseudo1", "pseudo2"};
    std::vector<std::string> victim_ids{"victim1", "victim2", "victim3", "victim4"};
    std::uint64_t seed = 0;
    double box_low = 0.0;
    double box_high = 1.0;
    std::size_t max_samples = 0;  // 0 = whole eval split
    std::filesystem::path dataset;
    std::filesystem::path model_dir;
    std::filesystem::path output;

    /// Untargeted reference hyperparameters.
    static BetakConfig untargeted_defaults();
    /// Targeted hyperparameters: T=300, eps=16/255, beta=16/255.
    static BetakConfig targeted_defaults();

    void validate() const;
    /// Target class for a sample whose true label is `label` among `classes`.
    std::size_t target_for(std::size_t label, std::size_t classes) const;
    /// Canonical key/value text; parse_config(to_text()) round-trips.
    std::string to_text() const;
    /// FNV-1a 64 of to_text(), as 16 hex digits.
    std::string fingerprint() const;
};

BetakConfig parse_config(std::istream& in);
BetakConfig load_config(const std::filesystem::path& path);
void save_config(const BetakConfig& config, const std::filesystem::path& path);

}  // namespace betak
