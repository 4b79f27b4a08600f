#pragma once

#include "hbar/data.hpp"
#include "hbar/model.hpp"
#include "hbar/rng.hpp"
#include "hbar/tensor.hpp"

#include <functional>

namespace hbar::attacks {

/// An l-infinity threat model: perturbations delta with |delta_i| <= radius
/// and x+delta inside [clamp_lo, clamp_hi] per coordinate. Both constraints
/// hold exactly on every produced sample.
struct AttackConfig {
    double radius = 0.0;
    double step_size = 0.0;
    std::size_t steps = 0;
    enum class Loss { cross_entropy, cw_margin } loss = Loss::cross_entropy;
    bool random_start = false;
    double clamp_lo = 0.0;
    double clamp_hi = 1.0;
    std::uint64_t seed = 0;  // drives random starts when no Rng is supplied
};

/// Builds the scalar objective the attack ascends, given a frozen
/// (gradient-free) copy of the network and the perturbed batch on a tape.
using LossBuilder = std::function<Tensor(const model::Network& frozen, const Tensor& x_adv)>;

/// Single-step sign attack: clamp(x + radius * sign(grad_x loss)).
Tensor fgsm(const model::Network& net, const Tensor& x, const Tensor& y_onehot,
            const AttackConfig& cfg);

/// Projected gradient ascent on the configured loss. With steps=1, no
/// random start and step_size >= radius this is bitwise identical to fgsm.
Tensor pgd(const model::Network& net, const Tensor& x, const Tensor& y_onehot,
           const AttackConfig& cfg, Rng* rng = nullptr);

/// The generic PGD loop over an arbitrary objective; fgsm/pgd are thin
/// wrappers. steps=0 returns the (projected) start point.
Tensor pgd_ascend(const model::Network& net, const Tensor& x, const AttackConfig& cfg,
                  const LossBuilder& build_loss, Rng* rng = nullptr);

/// Fraction of samples still classified correctly after a per-batch
/// white-box attack. steps=0 means no attack (natural accuracy).
double robust_accuracy(const model::Network& net, const data::Dataset& ds,
                       const AttackConfig& cfg, std::size_t batch_size = 256);

}  // namespace hbar::attacks
