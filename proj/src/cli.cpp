#include "hbar/cli.hpp"

#include "hbar/csv.hpp"
#include "hbar/data.hpp"
#include "hbar/errors.hpp"
#include "hbar/eval.hpp"
#include "hbar/model.hpp"
#include "hbar/trainer.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

namespace hbar::cli {

namespace {

namespace fs = std::filesystem;

config::ExperimentConfig prepare(const std::string& config_path, const Overrides& ov) {
    config::ExperimentConfig cfg = config::parse_file(config_path);
    if (ov.out_dir) cfg.out_dir = *ov.out_dir;
    if (ov.seed) {
        cfg.seeds = {*ov.seed};
        cfg.train.seed = *ov.seed;
    }
    config::rehash(cfg);
    return cfg;
}

std::string run_dir(const config::ExperimentConfig& cfg) {
    const std::string dir = cfg.out_dir + "/" + cfg.run_name;
    fs::create_directories(dir);
    return dir;
}

std::string data_root(const config::ExperimentConfig& cfg) {
    if (!cfg.data_root.empty()) return cfg.data_root;
    if (const char* env = std::getenv("HBAR_DATA_DIR"); env && *env) return env;
    return "data/mnist";
}

struct LoadedData {
    data::Dataset train, test, probe;
};

data::Dataset load_test_set(const config::ExperimentConfig& cfg) {
    if (cfg.source == "synth")
        return data::synth_gaussian(cfg.synth_test, cfg.synth_d, cfg.synth_sigma,
                                    cfg.data_seed + 1);
    const std::string root = data_root(cfg);
    data::Dataset test =
        data::load_idx(root + "/" + cfg.test_images, root + "/" + cfg.test_labels);
    if (cfg.test_take > 0 && cfg.test_take < test.n())
        test = data::subset(test, cfg.test_take, cfg.data_seed + 1, cfg.stratified);
    test.split = data::Dataset::Split::test;
    return test;
}

LoadedData load_data(const config::ExperimentConfig& cfg) {
    data::Dataset pool;
    if (cfg.source == "synth") {
        pool = data::synth_gaussian(cfg.synth_n, cfg.synth_d, cfg.synth_sigma, cfg.data_seed);
    } else {
        const std::string root = data_root(cfg);
        pool = data::load_idx(root + "/" + cfg.train_images, root + "/" + cfg.train_labels);
    }
    if (cfg.probe_take + 2 > pool.n())
        throw ConfigError("probe_take leaves no training data");
    const std::size_t n_train =
        cfg.train_take > 0 ? cfg.train_take : pool.n() - cfg.probe_take;
    auto [train, probe] =
        data::split_train_probe(pool, n_train, cfg.probe_take, cfg.data_seed, cfg.stratified);

    LoadedData out;
    out.train = std::move(train);
    out.probe = std::move(probe);
    out.test = load_test_set(cfg);
    return out;
}

void require_model(const config::ExperimentConfig& cfg, const data::Dataset& train) {
    if (cfg.dims.size() < 2) throw ConfigError("config has no [model] dims");
    if (cfg.dims.front() != train.dim())
        throw ConfigError("model input dim " + std::to_string(cfg.dims.front()) +
                          " != data dim " + std::to_string(train.dim()));
    if (cfg.dims.back() != train.classes())
        throw ConfigError("model output dim " + std::to_string(cfg.dims.back()) +
                          " != class count " + std::to_string(train.classes()));
}

std::vector<std::size_t> dims_of(const model::Network& net) {
    std::vector<std::size_t> dims{net.in_dim()};
    for (const auto& layer : net.layers) dims.push_back(layer.w.cols());
    return dims;
}

std::string loss_name(const attacks::AttackConfig& a) {
    return a.loss == attacks::AttackConfig::Loss::cw_margin ? "cw_margin" : "cross_entropy";
}

const attacks::AttackConfig& require_primary_attack(const config::ExperimentConfig& cfg,
                                                    const char* who) {
    const auto* atk = cfg.find_attack(cfg.primary_attack);
    if (!atk)
        throw ConfigError(std::string(who) +
                          " needs an [attack.<name>] section and eval.primary_attack");
    return *atk;
}

void report_cells(csv::Writer& w, const std::vector<eval::ExperimentReport>& reports,
                  bool with_row_index) {
    std::size_t index = 0;
    for (const auto& rep : reports) {
        ++index;
        auto lead = [&](std::vector<std::string>& cells) {
            if (with_row_index) cells.push_back(csv::fmt(index));
            cells.push_back(rep.label);
            cells.push_back(csv::fmt(rep.hbar.lambda_x));
            cells.push_back(csv::fmt(rep.hbar.lambda_y));
            cells.push_back(csv::fmt(rep.hbar.ce_weight));
        };
        for (const auto& run : rep.runs) {
            std::vector<std::string> cells;
            lead(cells);
            cells.push_back(std::to_string(run.seed));
            cells.push_back(csv::fmt(run.natural_acc));
            cells.push_back(csv::fmt(run.robust_acc));
            cells.push_back(csv::fmt(run.hsic_xz_M));
            cells.push_back(csv::fmt(run.hsic_yz_M));
            w.row(cells);
        }
        std::vector<std::string> mean, dev;
        lead(mean);
        lead(dev);
        mean.insert(mean.end(), {"mean", csv::fmt(rep.mean_natural()),
                                 csv::fmt(rep.mean_robust()), "", ""});
        dev.insert(dev.end(), {"std", csv::fmt(rep.std_natural()),
                               csv::fmt(rep.std_robust()), "", ""});
        w.row(mean);
        w.row(dev);
    }
}

}  // namespace

void cmd_train(const std::string& config_path, const Overrides& ov) {
    const auto cfg = prepare(config_path, ov);
    const auto ds = load_data(cfg);
    require_model(cfg, ds.train);

    model::Network net = model::init(cfg.dims, cfg.train.seed);
    auto result = trainer::train(std::move(net), ds.train, ds.test, ds.probe, cfg.train);

    const std::string dir = run_dir(cfg);
    model::save_checkpoint(dir + "/model.ckpt", result.net, cfg.train.seed, cfg.train.epochs);

    std::vector<std::string> header{"epoch",       "ce",          "hsic_xz_sum",
                                    "hsic_yz_sum", "total",       "natural_acc",
                                    "hsic_xz_M_probe", "hsic_yz_M_probe"};
    if (cfg.log_robust) header.push_back("robust_acc");
    csv::Writer w(dir + "/epochs.csv", cfg.config_hash, header);
    for (const auto& log : result.logs) {
        std::vector<std::string> cells{
            csv::fmt(log.epoch),       csv::fmt(log.ce),
            csv::fmt(log.hsic_xz_sum), csv::fmt(log.hsic_yz_sum),
            csv::fmt(log.total),       csv::fmt(log.natural_acc),
            csv::fmt(log.probe_hsic_xz_M), csv::fmt(log.probe_hsic_yz_M)};
        if (cfg.log_robust) cells.push_back(csv::fmt(log.robust_acc.value_or(0.0)));
        w.row(cells);
    }

    const double final_acc = result.logs.empty() ? 0.0 : result.logs.back().natural_acc;
    std::printf("trained %s: %zu epochs, natural_acc=%.4f\n", cfg.run_name.c_str(),
                cfg.train.epochs, final_acc);
    std::printf("wrote %s/model.ckpt and %s/epochs.csv\n", dir.c_str(), dir.c_str());
}

void cmd_attack(const std::string& config_path, const Overrides& ov) {
    const auto cfg = prepare(config_path, ov);
    const std::string dir = run_dir(cfg);
    const std::string ckpt_path = ov.checkpoint ? *ov.checkpoint : dir + "/model.ckpt";

    const model::Checkpoint ckpt = model::load_checkpoint(ckpt_path);
    if (!cfg.dims.empty() && cfg.dims != dims_of(ckpt.net))
        throw ArtifactError("checkpoint dims do not match [model] dims in " + config_path);

    const data::Dataset test = load_test_set(cfg);
    if (ckpt.net.in_dim() != test.dim())
        throw ArtifactError("checkpoint input dim " + std::to_string(ckpt.net.in_dim()) +
                            " != data dim " + std::to_string(test.dim()));

    auto rows = eval::robustness_table(ckpt.net, test, cfg.eval_attacks);

    csv::Writer w(dir + "/robustness.csv", cfg.config_hash,
                  {"attack_name", "r", "steps", "step_size", "loss_variant", "robust_acc"});
    for (const auto& row : rows) {
        w.row({row.name, csv::fmt(row.cfg.radius), csv::fmt(row.cfg.steps),
               csv::fmt(row.cfg.step_size),
               row.name == "natural" ? "none" : loss_name(row.cfg),
               csv::fmt(row.robust_acc)});
        std::printf("%-16s robust_acc=%.4f\n", row.name.c_str(), row.robust_acc);
    }
    std::printf("wrote %s/robustness.csv\n", dir.c_str());
}

namespace {

eval::ExperimentContext make_context(const config::ExperimentConfig& cfg, const LoadedData& ds,
                                     const Overrides& ov, const char* who) {
    eval::ExperimentContext ctx;
    ctx.dims = cfg.dims;
    ctx.base = cfg.train;
    ctx.seeds = cfg.seeds;
    ctx.train = &ds.train;
    ctx.test = &ds.test;
    ctx.probe = &ds.probe;
    ctx.eval_attack = require_primary_attack(cfg, who);
    ctx.workers = ov.workers > 0 ? ov.workers : 1;
    return ctx;
}

}  // namespace

void cmd_ablate(const std::string& config_path, const Overrides& ov) {
    const auto cfg = prepare(config_path, ov);
    const auto ds = load_data(cfg);
    require_model(cfg, ds.train);
    const auto ctx = make_context(cfg, ds, ov, "ablate");

    const auto reports = eval::run_ablation(ctx);

    const std::string dir = run_dir(cfg);
    csv::Writer w(dir + "/ablation.csv", cfg.config_hash,
                  {"row", "label", "lambda_x", "lambda_y", "ce_weight", "seed", "natural_acc",
                   "robust_acc", "hsic_xz_M", "hsic_yz_M"});
    report_cells(w, reports, true);
    for (const auto& rep : reports)
        std::printf("%-16s natural=%.4f+-%.4f robust=%.4f+-%.4f\n", rep.label.c_str(),
                    rep.mean_natural(), rep.std_natural(), rep.mean_robust(), rep.std_robust());
    std::printf("wrote %s/ablation.csv\n", dir.c_str());
}

void cmd_sweep(const std::string& config_path, const Overrides& ov) {
    const auto cfg = prepare(config_path, ov);
    if (cfg.sweep_lambda_x.empty() || cfg.sweep_lambda_y.empty())
        throw ConfigError("sweep needs [sweep] lambda_x and lambda_y lists");
    const auto ds = load_data(cfg);
    require_model(cfg, ds.train);
    const auto ctx = make_context(cfg, ds, ov, "sweep");

    std::vector<std::pair<double, double>> grid;
    for (double lx : cfg.sweep_lambda_x)
        for (double ly : cfg.sweep_lambda_y) grid.emplace_back(lx, ly);
    const auto reports = eval::run_sensitivity(grid, ctx);

    const std::string dir = run_dir(cfg);
    csv::Writer w(dir + "/sensitivity.csv", cfg.config_hash,
                  {"label", "lambda_x", "lambda_y", "ce_weight", "seed", "natural_acc",
                   "robust_acc", "hsic_xz_M", "hsic_yz_M"});
    report_cells(w, reports, false);
    for (const auto& rep : reports)
        std::printf("lx=%-8g ly=%-8g natural=%.4f robust=%.4f\n", rep.hbar.lambda_x,
                    rep.hbar.lambda_y, rep.mean_natural(), rep.mean_robust());
    std::printf("wrote %s/sensitivity.csv\n", dir.c_str());
}

void cmd_theorems(const std::string& config_path, const Overrides& ov) {
    const auto cfg = prepare(config_path, ov);
    if (cfg.source != "synth")
        throw ConfigError("theorems needs data.source = synth (Gaussian hypothesis)");
    const auto ds = load_data(cfg);
    require_model(cfg, ds.train);

    const auto& th = cfg.theorems;
    struct Variant {
        const char* name;
        double lx, ly;
    };
    const Variant variants[] = {{"ce", 0.0, 0.0},
                                {"hbar_low", th.lambda_low_x, th.lambda_low_y},
                                {"hbar_high", th.lambda_high_x, th.lambda_high_y}};

    std::vector<model::Network> models;
    for (const auto& v : variants) {
        trainer::TrainConfig tc = cfg.train;
        tc.hbar.lambda_x = v.lx;
        tc.hbar.lambda_y = v.ly;
        tc.hbar.ce_weight = 1.0;
        model::Network net = model::init(cfg.dims, tc.seed);
        auto result = trainer::train(std::move(net), ds.train, ds.test, ds.probe, tc);
        std::printf("%-10s trained: natural_acc=%.4f\n", v.name,
                    result.logs.empty() ? 0.0 : result.logs.back().natural_acc);
        models.push_back(std::move(result.net));
    }

    const std::size_t probe_n = std::min(th.probe_limit, ds.probe.n());
    std::vector<std::size_t> idx(probe_n);
    for (std::size_t i = 0; i < probe_n; ++i) idx[i] = i;
    const data::Dataset probe = ds.probe.take(idx);

    const auto& ks = cfg.train.kernels;
    const auto thm1 = eval::validate_theorem1(models, probe.x, ks.x, ks.z);

    attacks::AttackConfig pgd_base;
    pgd_base.steps = th.attack_steps;
    pgd_base.step_size = th.attack_step_size;
    pgd_base.clamp_lo = probe.clamp_lo;
    pgd_base.clamp_hi = probe.clamp_hi;
    pgd_base.seed = cfg.train.seed;
    const auto thm2 =
        eval::validate_theorem2(models, probe, th.radii, th.rho_radius, pgd_base, ks.x, ks.z);

    const std::string dir = run_dir(cfg);
    {
        csv::Writer w(dir + "/theorems.csv", cfg.config_hash,
                      {"theorem", "rho", "zero_at_zero", "monotone", "verdict"});
        w.row({"theorem1", csv::fmt(thm1.rho), "na", "na", thm1.pass ? "PASS" : "FAIL"});
        w.row({"theorem2", csv::fmt(thm2.rho), thm2.zero_at_zero ? "true" : "false",
               thm2.monotone ? "true" : "false", thm2.pass ? "PASS" : "FAIL"});
    }
    {
        csv::Writer w(dir + "/theorem_models.csv", cfg.config_hash,
                      {"model", "lambda_x", "lambda_y", "hsic_xz", "output_var", "radius",
                       "sensitivity"});
        for (std::size_t mi = 0; mi < models.size(); ++mi)
            for (std::size_t ri = 0; ri < thm2.radii.size(); ++ri)
                w.row({variants[mi].name, csv::fmt(variants[mi].lx), csv::fmt(variants[mi].ly),
                       csv::fmt(thm2.hsic_xz[mi]), csv::fmt(thm1.output_var[mi]),
                       csv::fmt(thm2.radii[ri]), csv::fmt(thm2.sensitivity[mi][ri])});
    }

    std::printf("theorem1 %s rho=%.4f\n", thm1.pass ? "PASS" : "FAIL", thm1.rho);
    std::printf("theorem2 %s rho=%.4f zero_at_zero=%d monotone=%d\n",
                thm2.pass ? "PASS" : "FAIL", thm2.rho, thm2.zero_at_zero ? 1 : 0,
                thm2.monotone ? 1 : 0);
    std::printf("wrote %s/theorems.csv and %s/theorem_models.csv\n", dir.c_str(), dir.c_str());
}

}  // namespace hbar::cli
