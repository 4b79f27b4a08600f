#pragma once

#include "hbar/attacks.hpp"
#include "hbar/data.hpp"
#include "hbar/kernels.hpp"
#include "hbar/model.hpp"
#include "hbar/trainer.hpp"

#include <string>
#include <vector>

namespace hbar::eval {

/// One trained run and its headline metrics.
struct RunOutcome {
    std::uint64_t seed = 0;
    model::Network net;
    std::vector<trainer::EpochLog> logs;
    double natural_acc = 0.0;
    double robust_acc = 0.0;  // under the experiment's primary eval attack
    double hsic_xz_M = 0.0;   // final probe values
    double hsic_yz_M = 0.0;
};

/// A labeled experiment cell: one objective setting across seeds.
struct ExperimentReport {
    std::string label;
    objectives::HbarConfig hbar;
    std::vector<RunOutcome> runs;

    double mean_natural() const;
    double mean_robust() const;
    double std_natural() const;  // sample std; 0 when a single seed
    double std_robust() const;
};

/// Everything a multi-run experiment shares.
struct ExperimentContext {
    std::vector<std::size_t> dims;
    trainer::TrainConfig base;
    std::vector<std::uint64_t> seeds;
    const data::Dataset* train = nullptr;
    const data::Dataset* test = nullptr;
    const data::Dataset* probe = nullptr;
    attacks::AttackConfig eval_attack;
    std::size_t workers = 1;
};

/// The five objective variants of the ablation, identical data and seeds:
/// [i] CE; [ii] HSIC terms only; [iii] CE + X-penalty; [iv] CE - Y-reward;
/// [v] the full objective. Lambdas and ce_weight come from ctx.base.hbar;
/// row [ii] forces ce_weight to zero.
std::vector<ExperimentReport> run_ablation(const ExperimentContext& ctx);

/// One full train+eval per (lambda_x, lambda_y) grid point.
std::vector<ExperimentReport> run_sensitivity(
    const std::vector<std::pair<double, double>>& grid, const ExperimentContext& ctx);

/// Spearman rank correlation with average ranks on ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

/// Dependence/variance rank agreement across models: HSIC(X, Z_M) on the
/// probe vs the summed per-coordinate output variance.
struct Theorem1Report {
    std::vector<double> hsic_xz;
    std::vector<double> output_var;
    double rho = 0.0;
    bool pass = false;
};

Theorem1Report validate_theorem1(const std::vector<model::Network>& models,
                                 const Tensor& probe_x, const kernels::KernelSpec& x_spec,
                                 const kernels::KernelSpec& z_spec);

/// Adversarial output sensitivity E|h(X+delta) - h(X)| per model and
/// radius, delta found by PGD on the output change; checked for zero at
/// r=0, monotonicity in r, and rank correlation with HSIC(X, Z_M) at
/// `rho_radius`.
struct Theorem2Report {
    std::vector<double> radii;
    std::vector<std::vector<double>> sensitivity;  // [model][radius]
    std::vector<double> hsic_xz;
    double rho = 0.0;
    double rho_radius = 0.0;
    bool zero_at_zero = false;
    bool monotone = false;
    bool pass = false;
};

Theorem2Report validate_theorem2(const std::vector<model::Network>& models,
                                 const data::Dataset& synth, std::vector<double> radii,
                                 double rho_radius, const attacks::AttackConfig& pgd_base,
                                 const kernels::KernelSpec& x_spec,
                                 const kernels::KernelSpec& z_spec);

struct RobustnessRow {
    std::string name;
    attacks::AttackConfig cfg;
    double robust_acc = 0.0;
};

/// Natural accuracy first, then one row per named attack.
std::vector<RobustnessRow> robustness_table(
    const model::Network& net, const data::Dataset& ds,
    const std::vector<std::pair<std::string, attacks::AttackConfig>>& suite);

}  // namespace hbar::eval
