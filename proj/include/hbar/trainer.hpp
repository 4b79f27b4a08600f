#pragma once

#include "hbar/attacks.hpp"
#include "hbar/data.hpp"
#include "hbar/model.hpp"
#include "hbar/objectives.hpp"

#include <optional>
#include <utility>
#include <vector>

namespace hbar::trainer {

struct TrainConfig {
    std::size_t epochs = 1;
    std::size_t batch_size = 128;  // >= 2, HSIC needs pairs
    enum class Optimizer { sgd, adam } optimizer = Optimizer::adam;
    double learning_rate = 1e-3;
    // (epoch, multiplier) pairs; the multiplier applies from that 1-based
    // epoch onward. Epochs must be strictly increasing.
    std::vector<std::pair<std::size_t, double>> lr_schedule;
    std::uint64_t seed = 0;

    objectives::HbarConfig hbar;
    objectives::KernelSet kernels;

    // Present => adversarial training: each batch is attacked with this
    // config before the objective is built.
    std::optional<attacks::AttackConfig> adversarial;

    // Per-epoch robust-accuracy logging (optional, capped for cost).
    std::optional<attacks::AttackConfig> eval_attack;
    std::size_t eval_attack_limit = 512;
};

struct EpochLog {
    std::size_t epoch = 0;  // 1-based
    // Per-sample means of the objective breakdown over the epoch.
    double ce = 0.0;
    double hsic_xz_sum = 0.0;
    double hsic_yz_sum = 0.0;
    double total = 0.0;
    double natural_acc = 0.0;  // on the test set
    // End-of-epoch HSIC(X, Z_M) and HSIC(Y, Z_M) on the fixed probe batch.
    double probe_hsic_xz_M = 0.0;
    double probe_hsic_yz_M = 0.0;
    std::optional<double> robust_acc;
};

struct TrainResult {
    model::Network net;
    std::vector<EpochLog> logs;
};

/// Learning rate at a 1-based epoch: base times every multiplier whose
/// schedule epoch is <= epoch.
double lr_at(const std::vector<std::pair<std::size_t, double>>& schedule, double base,
             std::size_t epoch);

/// theta <- theta - lr * grad, then grads are left untouched.
void sgd_step(std::vector<Tensor>& params, double lr);

struct AdamState {
    std::vector<std::vector<double>> m, v;
    std::size_t t = 0;
};

/// Standard Adam with beta1=0.9, beta2=0.999, eps=1e-8, bias correction.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

/// Run the training loop; deterministic given (net, datasets, cfg).
/// Aborts with a diagnostic naming epoch, batch and term if the objective
/// goes non-finite.
TrainResult train(model::Network net, const data::Dataset& train_ds,
                  const data::Dataset& test_ds, const data::Dataset& probe_ds,
                  const TrainConfig& cfg);

}  // namespace hbar::trainer
