#pragma once

#include "hbar/attacks.hpp"
#include "hbar/trainer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace hbar::config {

/// Theorem-validation settings: the lambda pairs of the low/high
/// regularization runs plus the sensitivity measurement protocol.
struct TheoremConfig {
    double lambda_low_x = 0.001, lambda_low_y = 0.005;
    double lambda_high_x = 1.0, lambda_high_y = 50.0;
    std::vector<double> radii = {0.0, 0.05, 0.1, 0.2};
    double rho_radius = 0.1;
    std::size_t attack_steps = 20;
    double attack_step_size = 0.02;
    std::size_t probe_limit = 256;
};

/// A fully parsed and validated experiment file.
struct ExperimentConfig {
    // [data]
    std::string data_root;  // falls back to $HBAR_DATA_DIR, then data/mnist
    std::string source = "mnist";  // mnist | synth
    std::string train_images = "train-images-idx3-ubyte.gz";
    std::string train_labels = "train-labels-idx1-ubyte.gz";
    std::string test_images = "t10k-images-idx3-ubyte.gz";
    std::string test_labels = "t10k-labels-idx1-ubyte.gz";
    std::size_t train_take = 0;  // 0 = everything left after the probe
    std::size_t test_take = 0;   // 0 = all
    std::size_t probe_take = 512;
    bool stratified = true;
    std::uint64_t data_seed = 0;
    std::size_t synth_n = 4000;
    std::size_t synth_test = 1000;
    std::size_t synth_d = 10;
    double synth_sigma = 1.0;

    // [model]
    std::vector<std::size_t> dims;

    // [train] (+ [hbar]); train.seed is the first entry of seeds
    trainer::TrainConfig train;
    std::vector<std::uint64_t> seeds;
    bool adversarial = false;  // use [attack.train] during training

    // [attack.<name>]
    std::optional<attacks::AttackConfig> train_attack;
    std::vector<std::pair<std::string, attacks::AttackConfig>> eval_attacks;

    // [eval]
    std::string primary_attack;  // name in eval_attacks used for per-run robust_acc
    std::size_t eval_batch = 256;
    bool log_robust = false;
    std::size_t robust_limit = 512;

    // [sweep]
    std::vector<double> sweep_lambda_x;
    std::vector<double> sweep_lambda_y;

    // [theorems]
    TheoremConfig theorems;

    // [output]
    std::string out_dir = "runs";
    std::string run_name;  // defaults to the config file stem

    std::string config_hash;  // FNV-1a over the canonical resolved text

    /// The eval attack named `primary_attack` (validated to exist when any
    /// eval attacks are declared).
    const attacks::AttackConfig* find_attack(const std::string& name) const;
};

/// Parse and validate a config file. Unknown sections or keys, malformed
/// values, and violated numeric constraints raise ConfigError with the
/// offending line.
ExperimentConfig parse_file(const std::string& path);

/// Same, from in-memory text; `origin` names the source in diagnostics.
ExperimentConfig parse_text(const std::string& text, const std::string& origin);

/// Resolved key=value dump with sorted keys; the hash input.
std::string canonical_text(const ExperimentConfig& cfg);

std::uint64_t fnv1a64(const std::string& s);

/// Re-derives config_hash after programmatic edits (seed override).
void rehash(ExperimentConfig& cfg);

}  // namespace hbar::config
