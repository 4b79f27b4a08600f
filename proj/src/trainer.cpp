#include "hbar/trainer.hpp"

#include "hbar/errors.hpp"
#include "hbar/kernels.hpp"
#include "hbar/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace hbar::trainer {

double lr_at(const std::vector<std::pair<std::size_t, double>>& schedule, double base,
             std::size_t epoch) {
    double lr = base;
    for (const auto& [at, mult] : schedule)
        if (at <= epoch) lr *= mult;
    return lr;
}

void sgd_step(std::vector<Tensor>& params, double lr) {
    for (Tensor& p : params) {
        const std::vector<double>& g = p.grad();
        std::vector<double>& v = p.mutable_data();
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= lr * g[i];
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if (state.m.empty()) {
        state.m.resize(params.size());
        state.v.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            state.m[i].assign(params[i].size(), 0.0);
            state.v[i].assign(params[i].size(), 0.0);
        }
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::vector<double>& g = params[i].grad();
        std::vector<double>& m = state.m[i];
        std::vector<double>& v = state.v[i];
        std::vector<double>& theta = params[i].mutable_data();
        for (std::size_t j = 0; j < theta.size(); ++j) {
            m[j] = b1 * m[j] + (1.0 - b1) * g[j];
            v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
            theta[j] -= lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + eps);
        }
    }
}

namespace {

// Shuffle/attack draws use a stream derived from the seed so they do not
// replay the weight-init draws.
constexpr std::uint64_t kRunStream = 0x517cc1b727220a95ULL;

struct BatchView {
    Tensor x;  // on the batch tape
    Tensor y;
    std::size_t m = 0;
};

BatchView make_batch(Tape& tape, const data::Dataset& ds,
                     const std::vector<std::size_t>& order, std::size_t start,
                     std::size_t m) {
    const std::size_t d = ds.dim(), k = ds.classes();
    std::vector<double> xb(m * d), yb(m * k);
    for (std::size_t i = 0; i < m; ++i) {
        const std::size_t src = order[start + i];
        std::copy_n(ds.x.data().begin() + src * d, d, xb.begin() + i * d);
        std::copy_n(ds.y_onehot.data().begin() + src * k, k, yb.begin() + i * k);
    }
    return {tape.input({m, d}, std::move(xb), false), Tensor::leaf({m, k}, std::move(yb)), m};
}

void check_finite(const objectives::ObjectiveBreakdown& bd, std::size_t epoch,
                  std::size_t batch) {
    const char* term = nullptr;
    if (!std::isfinite(bd.ce))
        term = "ce";
    else if (!std::isfinite(bd.sum_hsic_xz))
        term = "hsic_xz";
    else if (!std::isfinite(bd.sum_hsic_yz))
        term = "hsic_yz";
    else if (!std::isfinite(bd.total.item()))
        term = "total";
    if (term)
        throw NumericError("training aborted: " + std::string(term) +
                           " went non-finite at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch));
}

double natural_accuracy(const model::Network& frozen, const data::Dataset& ds,
                        std::size_t chunk = 512) {
    const std::size_t n = ds.n(), d = ds.dim();
    std::size_t hits = 0;
    for (std::size_t start = 0; start < n; start += chunk) {
        const std::size_t m = std::min(chunk, n - start);
        std::vector<double> xb(ds.x.data().begin() + start * d,
                               ds.x.data().begin() + (start + m) * d);
        const Tensor logits =
            model::forward(frozen, Tensor::leaf({m, d}, std::move(xb))).logits;
        const auto pred = model::predict_labels(logits);
        for (std::size_t i = 0; i < m; ++i)
            if (pred[i] == ds.y_index[start + i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

/// HSIC(X, Z_M) and HSIC(Y, Z_M) of the probe batch, by value.
std::pair<double, double> probe_hsic(const model::Network& frozen,
                                     const data::Dataset& probe,
                                     const objectives::KernelSet& ks) {
    const Tensor z = model::forward(frozen, probe.x).logits;
    const auto kx = kernels::gram(probe.x, ks.x);
    const auto ky = kernels::gram(probe.y_onehot, ks.y);
    const auto kz = kernels::gram(z, ks.z);
    return {kernels::hsic(kx, kz).item(), kernels::hsic(ky, kz).item()};
}

void assert_adversarial_constraints(const Tensor& x_adv, const Tensor& x,
                                    const attacks::AttackConfig& cfg) {
    const auto& a = x_adv.data();
    const auto& b = x.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (std::fabs(a[i] - b[i]) > cfg.radius || a[i] < cfg.clamp_lo ||
            a[i] > cfg.clamp_hi)
            throw ContractError("adversarial batch violates the perturbation constraints");
    }
}

}  // namespace

TrainResult train(model::Network net, const data::Dataset& train_ds,
                  const data::Dataset& test_ds, const data::Dataset& probe_ds,
                  const TrainConfig& cfg) {
    if (train_ds.n() == 0) throw ContractError("train: empty dataset");
    if (cfg.batch_size < 2) throw ConfigError("train: batch_size must be >= 2");
    if (!(cfg.learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
    for (std::size_t i = 1; i < cfg.lr_schedule.size(); ++i)
        if (cfg.lr_schedule[i].first <= cfg.lr_schedule[i - 1].first)
            throw ConfigError("train: lr_schedule epochs must be strictly increasing");

    TrainResult result{std::move(net), {}};
    std::vector<Tensor> params = result.net.params();
    AdamState adam;
    Rng rng(cfg.seed ^ kRunStream);

    std::vector<std::size_t> order(train_ds.n());
    std::iota(order.begin(), order.end(), std::size_t{0});

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const double lr = lr_at(cfg.lr_schedule, cfg.learning_rate, epoch);
        rng.shuffle(order.begin(), order.end());

        double ce_sum = 0, xz_sum = 0, yz_sum = 0, total_sum = 0;
        std::size_t seen = 0, batch_index = 0;
        for (std::size_t start = 0; start + 2 <= order.size(); start += cfg.batch_size) {
            const std::size_t m = std::min(cfg.batch_size, order.size() - start);
            if (m < 2) break;
            Tape tape;
            BatchView batch = make_batch(tape, train_ds, order, start, m);

            objectives::ObjectiveBreakdown bd;
            if (cfg.adversarial) {
                Tensor x_adv = attacks::pgd(result.net, batch.x, batch.y,
                                            *cfg.adversarial, &rng);
                assert_adversarial_constraints(x_adv, batch.x, *cfg.adversarial);
                Tensor x_adv_t = tape.input(x_adv.shape(), x_adv.data(), false);
                bd = objectives::hbar_adv_objective(result.net, batch.x, batch.y, x_adv_t,
                                                    cfg.hbar, cfg.kernels);
            } else {
                bd = objectives::hbar_objective(result.net, batch.x, batch.y, cfg.hbar,
                                                cfg.kernels);
            }
            check_finite(bd, epoch, batch_index);

            for (Tensor& p : params) p.zero_grad();
            tape.backward(bd.total);
            if (cfg.optimizer == TrainConfig::Optimizer::sgd)
                sgd_step(params, lr);
            else
                adam_step(params, adam, lr);

            const double w = static_cast<double>(m);
            ce_sum += bd.ce * w;
            xz_sum += bd.sum_hsic_xz * w;
            yz_sum += bd.sum_hsic_yz * w;
            total_sum += bd.total.item() * w;
            seen += m;
            ++batch_index;
        }

        const model::Network frozen = result.net.detached(false);
        EpochLog log;
        log.epoch = epoch;
        const double inv = seen ? 1.0 / static_cast<double>(seen) : 0.0;
        log.ce = ce_sum * inv;
        log.hsic_xz_sum = xz_sum * inv;
        log.hsic_yz_sum = yz_sum * inv;
        log.total = total_sum * inv;
        log.natural_acc = natural_accuracy(frozen, test_ds);
        std::tie(log.probe_hsic_xz_M, log.probe_hsic_yz_M) =
            probe_hsic(frozen, probe_ds, cfg.kernels);
        if (cfg.eval_attack) {
            const std::size_t limit = std::min(cfg.eval_attack_limit, test_ds.n());
            std::vector<std::size_t> head(limit);
            std::iota(head.begin(), head.end(), std::size_t{0});
            log.robust_acc =
                attacks::robust_accuracy(frozen, test_ds.take(head), *cfg.eval_attack);
        }
        result.logs.push_back(std::move(log));
    }
    return result;
}

}  // namespace hbar::trainer
