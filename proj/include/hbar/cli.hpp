#pragma once

#include "hbar/config.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace hbar::cli {

/// Command-line overrides applied on top of the config file.
struct Overrides {
    std::optional<std::string> checkpoint;
    std::optional<std::string> out_dir;
    std::size_t workers = 1;
    std::optional<std::uint64_t> seed;
};

// Each command trains/evaluates per its config and writes its artifacts
// under <out>/<run_name>/. They throw (ConfigError, NumericError,
// ArtifactError...) rather than returning codes; the binary maps
// exceptions to exit codes 2/3/4.
void cmd_train(const std::string& config_path, const Overrides& ov);
void cmd_attack(const std::string& config_path, const Overrides& ov);
void cmd_ablate(const std::string& config_path, const Overrides& ov);
void cmd_sweep(const std::string& config_path, const Overrides& ov);
void cmd_theorems(const std::string& config_path, const Overrides& ov);

}  // namespace hbar::cli
