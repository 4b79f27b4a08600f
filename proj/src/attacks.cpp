#include "hbar/attacks.hpp"

#include "hbar/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hbar::attacks {

namespace {

double sgn(double v) { return v > 0.0 ? 1.0 : v < 0.0 ? -1.0 : 0.0; }

/// Projects `adv` onto the l-inf ball around `x0` intersected with the
/// clamp box. The ball constraint is enforced exactly: after clipping the
/// perturbation, re-adding it to x0 can overshoot the radius by an ulp, so
/// offending coordinates are nudged back toward x0.
void project(std::vector<double>& adv, const std::vector<double>& x0, double r, double lo,
             double hi) {
    for (std::size_t i = 0; i < adv.size(); ++i) {
        double d = adv[i] - x0[i];
        if (d > r)
            d = r;
        else if (d < -r)
            d = -r;
        double c = x0[i] + d;
        if (c < lo)
            c = lo;
        else if (c > hi)
            c = hi;
        while (std::fabs(c - x0[i]) > r) c = std::nextafter(c, x0[i]);
        adv[i] = c;
    }
}

void validate(const AttackConfig& cfg) {
    if (cfg.radius < 0.0) throw ConfigError("attack: radius must be nonnegative");
    if (cfg.step_size < 0.0) throw ConfigError("attack: step_size must be nonnegative");
    if (!(cfg.clamp_lo < cfg.clamp_hi)) throw ConfigError("attack: empty clamp range");
}

LossBuilder builder_for(AttackConfig::Loss loss, const Tensor& y_onehot) {
    if (loss == AttackConfig::Loss::cross_entropy)
        return [y_onehot](const model::Network& frozen, const Tensor& x_adv) {
            return cross_entropy_mean(model::forward(frozen, x_adv).logits, y_onehot);
        };
    return [y_onehot](const model::Network& frozen, const Tensor& x_adv) {
        return cw_margin_mean(model::forward(frozen, x_adv).logits, y_onehot);
    };
}

}  // namespace

Tensor pgd_ascend(const model::Network& net, const Tensor& x, const AttackConfig& cfg,
                  const LossBuilder& build_loss, Rng* rng) {
    validate(cfg);
    if (x.ndim() != 2) throw DimensionError("attack: batch must be 2-d");
    const model::Network frozen = net.detached(false);
    const std::vector<double>& x0 = x.data();

    std::vector<double> adv = x0;
    Rng own(cfg.seed);
    if (!rng) rng = &own;
    if (cfg.random_start && cfg.radius > 0.0)
        for (double& v : adv) v += rng->uniform(-cfg.radius, cfg.radius);
    project(adv, x0, cfg.radius, cfg.clamp_lo, cfg.clamp_hi);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        Tape tape;
        Tensor xt = tape.input(x.shape(), adv, true);
        Tensor loss = build_loss(frozen, xt);
        tape.backward(loss);
        const std::vector<double>& g = xt.grad();
        for (std::size_t i = 0; i < adv.size(); ++i) adv[i] += cfg.step_size * sgn(g[i]);
        project(adv, x0, cfg.radius, cfg.clamp_lo, cfg.clamp_hi);
    }
    return Tensor::leaf(x.shape(), std::move(adv));
}

Tensor pgd(const model::Network& net, const Tensor& x, const Tensor& y_onehot,
           const AttackConfig& cfg, Rng* rng) {
    if (cfg.steps < 1) throw ContractError("pgd: needs steps >= 1");
    return pgd_ascend(net, x, cfg, builder_for(cfg.loss, y_onehot), rng);
}

Tensor fgsm(const model::Network& net, const Tensor& x, const Tensor& y_onehot,
            const AttackConfig& cfg) {
    AttackConfig single = cfg;
    single.steps = 1;
    single.step_size = cfg.radius;
    single.random_start = false;
    return pgd(net, x, y_onehot, single);
}

double robust_accuracy(const model::Network& net, const data::Dataset& ds,
                       const AttackConfig& cfg, std::size_t batch_size) {
    if (ds.n() == 0) throw ContractError("robust_accuracy: empty dataset");
    if (batch_size == 0) throw ContractError("robust_accuracy: batch_size must be positive");
    validate(cfg);
    const model::Network frozen = net.detached(false);
    Rng rng(cfg.seed);

    const std::size_t n = ds.n(), d = ds.dim(), k = ds.classes();
    std::size_t hits = 0;
    for (std::size_t start = 0; start < n; start += batch_size) {
        const std::size_t m = std::min(batch_size, n - start);
        std::vector<double> xb(ds.x.data().begin() + start * d,
                               ds.x.data().begin() + (start + m) * d);
        std::vector<double> yb(ds.y_onehot.data().begin() + start * k,
                               ds.y_onehot.data().begin() + (start + m) * k);
        Tensor x = Tensor::leaf({m, d}, std::move(xb));
        Tensor x_adv = x;
        if (cfg.steps > 0) {
            Tensor y = Tensor::leaf({m, k}, std::move(yb));
            x_adv = pgd(frozen, x, y, cfg, &rng);
        }
        const Tensor logits = model::forward(frozen, x_adv).logits;
        const auto pred = model::predict_labels(logits);
        for (std::size_t i = 0; i < m; ++i)
            if (pred[i] == ds.y_index[start + i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

}  // namespace hbar::attacks
