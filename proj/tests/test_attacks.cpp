#include "doctest.h"

#include "hbar/attacks.hpp"
#include "hbar/data.hpp"
#include "hbar/errors.hpp"
#include "hbar/model.hpp"
#include "hbar/rng.hpp"
#include "hbar/tensor.hpp"
#include "hbar/trainer.hpp"

#include <cmath>
#include <cstring>
#include <vector>

#include "oracles.hpp"
#include "support.hpp"

using namespace hbar;
using attacks::AttackConfig;
using support::matrix;

namespace {

// z = [x, -x]: CE toward class 1 grows with x, so the gradient sign is +1.
model::Network slope_net() {
    model::Network net;
    net.layers.push_back({matrix(1, 2, {1.0, -1.0}), Tensor::zeros({2}),
                          model::Activation::identity});
    return net;
}

double sample_ce(const model::Network& net, const Tensor& x_row, std::size_t label,
                 std::size_t k) {
    auto frozen = net.detached(false);
    return cross_entropy_mean(model::forward(frozen, x_row).logits,
                              support::one_hot({label}, k))
        .item();
}

// quick synthetic binary classifier for attack-quality checks
struct TrainedSynth {
    model::Network net;
    data::Dataset test;
};

TrainedSynth trained_synth() {
    auto train = data::synth_gaussian(512, 6, 1.0, 11);
    auto test = data::synth_gaussian(256, 6, 1.0, 12);
    trainer::TrainConfig cfg;
    cfg.epochs = 5;
    cfg.batch_size = 64;
    cfg.learning_rate = 0.01;
    cfg.seed = 3;
    auto res = trainer::train(model::init({6, 16, 2}, 3), train, test, train, cfg);
    return {std::move(res.net), std::move(test)};
}

std::vector<double> flat_params(const model::Network& net) {
    std::vector<double> all;
    for (const auto& layer : net.layers) {
        all.insert(all.end(), layer.w.data().begin(), layer.w.data().end());
        all.insert(all.end(), layer.b.data().begin(), layer.b.data().end());
    }
    return all;
}

}  // namespace

TEST_SUITE("attacks") {

TEST_CASE("fgsm with zero radius returns the input bitwise") {
    auto net = slope_net();
    auto x = matrix(2, 1, {0.3, 0.7});
    AttackConfig cfg;
    cfg.radius = 0.0;
    auto adv = attacks::fgsm(net, x, support::one_hot({0, 1}, 2), cfg);
    CHECK(std::memcmp(adv.data().data(), x.data().data(), 2 * sizeof(double)) == 0);
}

TEST_CASE("fgsm moves along the gradient sign") {
    auto net = slope_net();
    auto x = matrix(1, 1, {0.5});
    AttackConfig cfg;
    cfg.radius = 0.3;
    // true class 1: loss decreases in logit_1 - logit_0 = -2x, so d(loss)/dx > 0
    auto adv = attacks::fgsm(net, x, support::one_hot({1}, 2), cfg);
    CHECK(adv.item() == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("fgsm satisfies radius and clamp constraints exactly") {
    Rng rng(101);
    auto net = model::init({784, 32, 10}, 5);
    AttackConfig cfg;
    cfg.radius = 0.3;
    for (int rep = 0; rep < 4; ++rep) {
        auto rows = support::random_rows(25, 784, rng, 0.0, 1.0);
        auto x = support::from_rows(rows);
        std::vector<std::size_t> labels(25);
        for (auto& l : labels) l = rng.integer(10);
        auto adv = attacks::fgsm(net, x, support::one_hot(labels, 10), cfg);
        for (std::size_t i = 0; i < adv.size(); ++i) {
            const double delta = adv.data()[i] - x.data()[i];
            CHECK(std::fabs(delta) <= 0.3);
            CHECK(adv.data()[i] >= 0.0);
            CHECK(adv.data()[i] <= 1.0);
        }
    }
}

TEST_CASE("pgd single plain step reproduces fgsm bitwise") {
    Rng rng(103);
    auto net = model::init({12, 8, 3}, 9);
    auto x = support::from_rows(support::random_rows(10, 12, rng, 0.0, 1.0));
    auto y = support::one_hot({0, 1, 2, 0, 1, 2, 0, 1, 2, 0}, 3);

    AttackConfig cfg;
    cfg.radius = 0.2;
    auto f = attacks::fgsm(net, x, y, cfg);

    AttackConfig pcfg = cfg;
    pcfg.steps = 1;
    pcfg.step_size = 0.25;  // >= radius
    pcfg.random_start = false;
    auto p = attacks::pgd(net, x, y, pcfg);
    REQUIRE(f.size() == p.size());
    CHECK(std::memcmp(f.data().data(), p.data().data(), f.size() * sizeof(double)) == 0);
}

TEST_CASE("oversized steps are projected back to the radius") {
    auto net = slope_net();
    auto x = matrix(1, 1, {0.5});
    AttackConfig cfg;
    cfg.radius = 0.3;
    cfg.step_size = 0.5;  // overshoots, projection must clip delta to 0.3
    cfg.steps = 1;
    auto adv = attacks::pgd(net, x, support::one_hot({1}, 2), cfg);
    CHECK(adv.item() == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("pgd constraints hold across steps and random starts") {
    Rng rng(107);
    auto net = model::init({20, 12, 4}, 17);
    AttackConfig cfg;
    cfg.radius = 0.25;
    cfg.step_size = 0.07;
    cfg.steps = 12;
    cfg.random_start = true;
    cfg.seed = 5;
    auto x = support::from_rows(support::random_rows(40, 20, rng, 0.0, 1.0));
    std::vector<std::size_t> labels(40);
    for (auto& l : labels) l = rng.integer(4);
    auto adv = attacks::pgd(net, x, support::one_hot(labels, 4), cfg);
    for (std::size_t i = 0; i < adv.size(); ++i) {
        CHECK(std::fabs(adv.data()[i] - x.data()[i]) <= 0.25);
        CHECK(adv.data()[i] >= 0.0);
        CHECK(adv.data()[i] <= 1.0);
    }
}

TEST_CASE("pgd raises the loss on a trained model") {
    auto ts = trained_synth();
    AttackConfig cfg;
    cfg.radius = 0.3;
    cfg.step_size = 0.05;
    cfg.steps = 40;
    cfg.clamp_lo = -10.0;
    cfg.clamp_hi = 10.0;

    int raised = 0;
    const std::size_t n = 100;
    for (std::size_t i = 0; i < n; ++i) {
        auto one = ts.test.take({i});
        auto adv = attacks::pgd(ts.net, one.x, one.y_onehot, cfg);
        const double before = sample_ce(ts.net, one.x, one.y_index[0], 2);
        const double after = sample_ce(ts.net, adv, one.y_index[0], 2);
        if (after >= before) ++raised;
    }
    CHECK(raised >= 95);
}

TEST_CASE("doubling pgd steps rarely lowers the per-sample loss") {
    auto ts = trained_synth();
    AttackConfig cfg;
    cfg.radius = 0.3;
    cfg.step_size = 0.02;
    cfg.clamp_lo = -10.0;
    cfg.clamp_hi = 10.0;
    cfg.random_start = false;

    int not_worse = 0;
    const std::size_t n = 100;
    for (std::size_t i = 0; i < n; ++i) {
        auto one = ts.test.take({i});
        cfg.steps = 10;
        auto a10 = attacks::pgd(ts.net, one.x, one.y_onehot, cfg);
        cfg.steps = 20;
        auto a20 = attacks::pgd(ts.net, one.x, one.y_onehot, cfg);
        const double l10 = sample_ce(ts.net, a10, one.y_index[0], 2);
        const double l20 = sample_ce(ts.net, a20, one.y_index[0], 2);
        if (l20 >= l10 - 1e-12) ++not_worse;
    }
    CHECK(not_worse >= 95);
}

TEST_CASE("cw margin variant drives misclassification") {
    auto ts = trained_synth();
    AttackConfig cfg;
    cfg.radius = 0.5;
    cfg.step_size = 0.05;
    cfg.steps = 30;
    cfg.loss = AttackConfig::Loss::cw_margin;
    cfg.clamp_lo = -10.0;
    cfg.clamp_hi = 10.0;

    const double natural = [&] {
        AttackConfig none;
        none.clamp_lo = -10.0;
        none.clamp_hi = 10.0;
        return attacks::robust_accuracy(ts.net, ts.test, none);
    }();
    const double under_cw = attacks::robust_accuracy(ts.net, ts.test, cfg);
    CHECK(under_cw < natural);
}

TEST_CASE("robust accuracy with steps=0 equals natural accuracy") {
    auto ts = trained_synth();
    AttackConfig cfg;
    cfg.clamp_lo = -10.0;
    cfg.clamp_hi = 10.0;

    auto frozen = ts.net.detached(false);
    const double natural =
        model::accuracy(model::forward(frozen, ts.test.x).logits, ts.test.y_index);
    CHECK(attacks::robust_accuracy(ts.net, ts.test, cfg) == natural);
}

TEST_CASE("an untrained net sits near chance and attacks only hurt") {
    auto ds = data::synth_gaussian(1200, 8, 1.0, 31);
    auto net = model::init({8, 16, 2}, 99);
    AttackConfig cfg;
    cfg.radius = 0.2;
    cfg.step_size = 0.05;
    cfg.steps = 5;
    cfg.clamp_lo = -10.0;
    cfg.clamp_hi = 10.0;
    cfg.seed = 1;

    AttackConfig none = cfg;
    none.steps = 0;
    const double natural = attacks::robust_accuracy(net, ds, none);
    const double attacked = attacks::robust_accuracy(net, ds, cfg);
    // A random decision boundary on balanced labels: chance-ish, not exact.
    CHECK(natural > 0.3);
    CHECK(natural < 0.7);
    CHECK(attacked <= natural);
    CHECK(attacked >= 0.0);
}

TEST_CASE("robust accuracy on an empty dataset is a contract error") {
    data::Dataset empty;
    auto net = model::init({4, 2}, 1);
    CHECK_THROWS_AS(attacks::robust_accuracy(net, empty, AttackConfig{}), ContractError);
}

TEST_CASE("larger radius does not help the defender") {
    auto ts = trained_synth();
    AttackConfig cfg;
    cfg.step_size = 0.05;
    cfg.steps = 20;
    cfg.clamp_lo = -10.0;
    cfg.clamp_hi = 10.0;
    cfg.seed = 4;

    cfg.radius = 0.1;
    const double r_small = attacks::robust_accuracy(ts.net, ts.test, cfg);
    cfg.radius = 0.3;
    const double r_big = attacks::robust_accuracy(ts.net, ts.test, cfg);
    CHECK(r_small >= r_big - 0.02);
}

TEST_CASE("attacks never touch the parameters") {
    auto ts = trained_synth();
    const auto before = flat_params(ts.net);
    AttackConfig cfg;
    cfg.radius = 0.3;
    cfg.step_size = 0.05;
    cfg.steps = 15;
    cfg.random_start = true;
    cfg.clamp_lo = -10.0;
    cfg.clamp_hi = 10.0;
    attacks::robust_accuracy(ts.net, ts.test, cfg);
    const auto after = flat_params(ts.net);
    REQUIRE(before.size() == after.size());
    CHECK(std::memcmp(before.data(), after.data(), before.size() * sizeof(double)) == 0);
}

}  // TEST_SUITE
