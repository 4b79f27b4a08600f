#include "hbar/eval.hpp"

#include "hbar/errors.hpp"
#include "hbar/objectives.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

namespace hbar::eval {

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mu = mean_of(v);
    double acc = 0.0;
    for (double x : v) acc += (x - mu) * (x - mu);
    return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

std::vector<double> collect(const std::vector<RunOutcome>& runs, double RunOutcome::*field) {
    std::vector<double> v;
    v.reserve(runs.size());
    for (const auto& r : runs) v.push_back(r.*field);
    return v;
}

/// Runs fn(0..n) on up to `workers` threads; the first exception wins.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mu;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(error_mu);
                    if (!error) error = std::current_exception();
                    return;
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

/// One full train + headline evaluation.
RunOutcome run_once(const ExperimentContext& ctx, const objectives::HbarConfig& hbar,
                    std::uint64_t seed) {
    trainer::TrainConfig cfg = ctx.base;
    cfg.hbar = hbar;
    cfg.seed = seed;

    model::Network net = model::init(ctx.dims, seed);
    auto trained = trainer::train(std::move(net), *ctx.train, *ctx.test, *ctx.probe, cfg);

    RunOutcome out;
    out.seed = seed;
    out.net = std::move(trained.net);
    out.logs = std::move(trained.logs);
    if (!out.logs.empty()) {
        out.natural_acc = out.logs.back().natural_acc;
        out.hsic_xz_M = out.logs.back().probe_hsic_xz_M;
        out.hsic_yz_M = out.logs.back().probe_hsic_yz_M;
    }
    attacks::AttackConfig atk = ctx.eval_attack;
    atk.seed = seed;
    out.robust_acc = attacks::robust_accuracy(out.net, *ctx.test, atk);
    return out;
}

std::vector<ExperimentReport> run_grid(const ExperimentContext& ctx,
                                       std::vector<ExperimentReport> cells) {
    const std::size_t per_cell = ctx.seeds.size();
    for (auto& cell : cells) cell.runs.resize(per_cell);
    parallel_for(cells.size() * per_cell, ctx.workers, [&](std::size_t job) {
        ExperimentReport& cell = cells[job / per_cell];
        const std::uint64_t seed = ctx.seeds[job % per_cell];
        cell.runs[job % per_cell] = run_once(ctx, cell.hbar, seed);
    });
    return cells;
}

}  // namespace

double ExperimentReport::mean_natural() const {
    return mean_of(collect(runs, &RunOutcome::natural_acc));
}
double ExperimentReport::mean_robust() const {
    return mean_of(collect(runs, &RunOutcome::robust_acc));
}
double ExperimentReport::std_natural() const {
    return sample_std(collect(runs, &RunOutcome::natural_acc));
}
double ExperimentReport::std_robust() const {
    return sample_std(collect(runs, &RunOutcome::robust_acc));
}

std::vector<ExperimentReport> run_ablation(const ExperimentContext& ctx) {
    if (!ctx.train || !ctx.test || !ctx.probe)
        throw ContractError("run_ablation: datasets not set");
    if (ctx.seeds.empty()) throw ContractError("run_ablation: no seeds");

    const double lx = ctx.base.hbar.lambda_x;
    const double ly = ctx.base.hbar.lambda_y;
    const double ce = ctx.base.hbar.ce_weight;
    auto variant = [&](const char* label, double ce_w, double vx, double vy) {
        ExperimentReport r;
        r.label = label;
        r.hbar = ctx.base.hbar;
        r.hbar.ce_weight = ce_w;
        r.hbar.lambda_x = vx;
        r.hbar.lambda_y = vy;
        return r;
    };
    std::vector<ExperimentReport> cells;
    cells.push_back(variant("i_ce_only", ce, 0.0, 0.0));
    cells.push_back(variant("ii_hsic_only", 0.0, lx, ly));
    cells.push_back(variant("iii_ce_xpenalty", ce, lx, 0.0));
    cells.push_back(variant("iv_ce_yreward", ce, 0.0, ly));
    cells.push_back(variant("v_full_hbar", ce, lx, ly));
    return run_grid(ctx, std::move(cells));
}

std::vector<ExperimentReport> run_sensitivity(
    const std::vector<std::pair<double, double>>& grid, const ExperimentContext& ctx) {
    if (grid.empty()) throw ContractError("run_sensitivity: empty grid");
    if (!ctx.train || !ctx.test || !ctx.probe)
        throw ContractError("run_sensitivity: datasets not set");
    std::vector<ExperimentReport> cells;
    cells.reserve(grid.size());
    for (const auto& [lx, ly] : grid) {
        ExperimentReport r;
        r.label = "lx=" + std::to_string(lx) + ",ly=" + std::to_string(ly);
        r.hbar = ctx.base.hbar;
        r.hbar.lambda_x = lx;
        r.hbar.lambda_y = ly;
        cells.push_back(std::move(r));
    }
    return run_grid(ctx, std::move(cells));
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2)
        throw ContractError("spearman: needs two equal-length samples of size >= 2");
    auto ranks = [](const std::vector<double>& v) {
        const std::size_t n = v.size();
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
            return v[i] < v[j];
        });
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // average rank, 1-based
            for (std::size_t t = i; t <= j; ++t) r[idx[t]] = avg;
            i = j + 1;
        }
        return r;
    };
    const auto ra = ranks(a), rb = ranks(b);
    const double ma = mean_of(ra), mb = mean_of(rb);
    double cov = 0, va = 0, vb = 0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0.0 || vb == 0.0) return 0.0;  // a constant ranking carries no order
    return cov / std::sqrt(va * vb);
}

Theorem1Report validate_theorem1(const std::vector<model::Network>& models,
                                 const Tensor& probe_x, const kernels::KernelSpec& x_spec,
                                 const kernels::KernelSpec& z_spec) {
    if (models.size() < 3)
        throw ContractError("validate_theorem1: needs at least 3 models, got " +
                            std::to_string(models.size()));
    Theorem1Report rep;
    const auto kx = kernels::gram(probe_x, x_spec);
    for (const model::Network& net : models) {
        const model::Network frozen = net.detached(false);
        const Tensor z = model::forward(frozen, probe_x).logits;
        rep.hsic_xz.push_back(kernels::hsic(kx, kernels::gram(z, z_spec)).item());

        const std::size_t m = z.rows(), k = z.cols();
        double total_var = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            double mu = 0.0;
            for (std::size_t i = 0; i < m; ++i) mu += z.at(i, j);
            mu /= static_cast<double>(m);
            double acc = 0.0;
            for (std::size_t i = 0; i < m; ++i) acc += (z.at(i, j) - mu) * (z.at(i, j) - mu);
            total_var += acc / static_cast<double>(m - 1);
        }
        rep.output_var.push_back(total_var);
    }
    rep.rho = spearman(rep.hsic_xz, rep.output_var);
    rep.pass = rep.rho >= 0.5;
    return rep;
}

Theorem2Report validate_theorem2(const std::vector<model::Network>& models,
                                 const data::Dataset& synth, std::vector<double> radii,
                                 double rho_radius, const attacks::AttackConfig& pgd_base,
                                 const kernels::KernelSpec& x_spec,
                                 const kernels::KernelSpec& z_spec) {
    if (!synth.synthetic)
        throw ContractError("validate_theorem2: dataset is not synthetic Gaussian");
    if (models.size() < 3)
        throw ContractError("validate_theorem2: needs at least 3 models");
    std::sort(radii.begin(), radii.end());

    Theorem2Report rep;
    rep.radii = radii;
    rep.rho_radius = rho_radius;
    const auto kx = kernels::gram(synth.x, x_spec);

    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const model::Network frozen = models[mi].detached(false);
        const Tensor base_logits = model::forward(frozen, synth.x).logits;
        rep.hsic_xz.push_back(
            kernels::hsic(kx, kernels::gram(base_logits, z_spec)).item());

        const Tensor baseline = base_logits.clone_detached();
        std::vector<double> sens;
        for (std::size_t ri = 0; ri < radii.size(); ++ri) {
            const double r = radii[ri];
            if (r == 0.0) {
                sens.push_back(0.0);
                continue;
            }
            attacks::AttackConfig cfg = pgd_base;
            cfg.radius = r;
            cfg.clamp_lo = synth.clamp_lo;
            cfg.clamp_hi = synth.clamp_hi;
            cfg.seed = pgd_base.seed + 1000 * mi + ri;
            // |logits - baseline| has a zero gradient exactly at delta = 0;
            // start inside the ball so ascent can move.
            cfg.random_start = true;
            const Tensor x_adv = attacks::pgd_ascend(
                frozen, synth.x, cfg,
                [&baseline](const model::Network& f, const Tensor& xt) {
                    return mean_all(abs_elem(sub(model::forward(f, xt).logits, baseline)));
                });
            const Tensor adv_logits = model::forward(frozen, x_adv).logits;
            double acc = 0.0;
            for (std::size_t i = 0; i < adv_logits.size(); ++i)
                acc += std::fabs(adv_logits.data()[i] - baseline.data()[i]);
            sens.push_back(acc / static_cast<double>(adv_logits.size()));
        }
        rep.sensitivity.push_back(std::move(sens));
    }

    rep.zero_at_zero = true;
    rep.monotone = true;
    std::vector<double> sens_at_rho;
    for (std::size_t mi = 0; mi < models.size(); ++mi) {
        const auto& s = rep.sensitivity[mi];
        for (std::size_t ri = 0; ri < radii.size(); ++ri) {
            if (radii[ri] == 0.0 && s[ri] != 0.0) rep.zero_at_zero = false;
            if (ri > 0 && s[ri] < s[ri - 1] - 1e-12) rep.monotone = false;
        }
        // Sensitivity at the correlation radius (nearest grid point).
        std::size_t best = 0;
        for (std::size_t ri = 1; ri < radii.size(); ++ri)
            if (std::fabs(radii[ri] - rho_radius) < std::fabs(radii[best] - rho_radius))
                best = ri;
        sens_at_rho.push_back(s[best]);
    }
    rep.rho = spearman(rep.hsic_xz, sens_at_rho);
    rep.pass = rep.zero_at_zero && rep.monotone && rep.rho >= 0.5;
    return rep;
}

std::vector<RobustnessRow> robustness_table(
    const model::Network& net, const data::Dataset& ds,
    const std::vector<std::pair<std::string, attacks::AttackConfig>>& suite) {
    std::vector<RobustnessRow> rows;
    rows.reserve(suite.size() + 1);
    attacks::AttackConfig natural;
    natural.clamp_lo = ds.clamp_lo;
    natural.clamp_hi = ds.clamp_hi;
    rows.push_back({"natural", natural, attacks::robust_accuracy(net, ds, natural)});
    for (const auto& [name, cfg] : suite)
        rows.push_back({name, cfg, attacks::robust_accuracy(net, ds, cfg)});
    return rows;
}

}  // namespace hbar::eval
