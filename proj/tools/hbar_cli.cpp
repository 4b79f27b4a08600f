#include "hbar/cli.hpp"
#include "hbar/errors.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <functional>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"HSIC-bottleneck regularized training and robustness evaluation"};
    app.require_subcommand(1);

    std::string config_path;
    hbar::cli::Overrides ov;
    std::string checkpoint, out_dir;
    std::uint64_t seed = 0;

    std::function<void(const std::string&, const hbar::cli::Overrides&)> command;
    for (const auto& [name, desc, fn] :
         {std::tuple{"train", "train a model, write checkpoint + epochs.csv",
                     &hbar::cli::cmd_train},
          std::tuple{"attack", "evaluate a checkpoint against the attack suite",
                     &hbar::cli::cmd_attack},
          std::tuple{"ablate", "run the five-row objective ablation", &hbar::cli::cmd_ablate},
          std::tuple{"sweep", "run the lambda sensitivity sweep", &hbar::cli::cmd_sweep},
          std::tuple{"theorems", "train the ce/low/high trio and validate the theorems",
                     &hbar::cli::cmd_theorems}}) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "experiment config file")->required();
        sub->add_option("--checkpoint", checkpoint, "checkpoint path (attack)");
        sub->add_option("--out", out_dir, "output directory override");
        sub->add_option("--workers", ov.workers, "parallel jobs for ablate/sweep");
        sub->add_option("--seed-override", seed, "replace the config seed list");
        sub->callback([&command, fn] { command = fn; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    if (!checkpoint.empty()) ov.checkpoint = checkpoint;
    if (!out_dir.empty()) ov.out_dir = out_dir;
    for (const CLI::App* sub : app.get_subcommands())
        if (sub->count("--seed-override")) ov.seed = seed;

    try {
        command(config_path, ov);
        return 0;
    } catch (const hbar::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const hbar::NumericError& e) {
        std::fprintf(stderr, "numeric error: %s\n", e.what());
        return 3;
    } catch (const hbar::ArtifactError& e) {
        std::fprintf(stderr, "artifact error: %s\n", e.what());
        return 4;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
