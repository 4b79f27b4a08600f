#pragma once

#include "hbar/kernels.hpp"
#include "hbar/model.hpp"
#include "hbar/tensor.hpp"

#include <vector>

namespace hbar::objectives {

/// Weights of the regularized objective
///   total = ce_weight * CE + lambda_x * sum_j HSIC(X,Z_j)
///                          - lambda_y * sum_j HSIC(Y,Z_j).
///
/// `layer_mask` lists the 1-based layer indices entering the sums; empty
/// means every layer. `ce_weight` makes the no-CE ablation row expressible
/// and sets the CE/HSIC balance when the lambdas are pinned.
struct HbarConfig {
    double lambda_x = 0.0;
    double lambda_y = 0.0;
    double ce_weight = 1.0;
    std::vector<std::size_t> layer_mask;
};

/// Kernel choices per variable: Gaussian for X and Z, linear for one-hot Y.
struct KernelSet {
    kernels::KernelSpec x = kernels::KernelSpec::gaussian_scaled(5.0);
    kernels::KernelSpec y = kernels::KernelSpec::linear();
    kernels::KernelSpec z = kernels::KernelSpec::gaussian_scaled(5.0);
};

struct ObjectiveBreakdown {
    Tensor total;  // scalar, on the tape
    double ce = 0.0;
    double sum_hsic_xz = 0.0;
    double sum_hsic_yz = 0.0;
    std::vector<double> hsic_xz;  // per masked layer
    std::vector<double> hsic_yz;
};

/// Mean cross-entropy of logits against one-hot labels.
Tensor cross_entropy(const Tensor& logits, const Tensor& y_onehot);

/// The full regularized objective on a natural batch. HSIC terms whose
/// lambda is zero are skipped (reported as 0) — they cannot change the
/// total. Requires batch size >= 2.
ObjectiveBreakdown hbar_objective(const model::Network& net, const Tensor& x, const Tensor& y,
                                  const HbarConfig& cfg, const KernelSet& ks);

/// Adversarial-training variant: CE is evaluated on x_adv while both HSIC
/// terms come from a second forward pass on the natural x.
ObjectiveBreakdown hbar_adv_objective(const model::Network& net, const Tensor& x,
                                      const Tensor& y, const Tensor& x_adv,
                                      const HbarConfig& cfg, const KernelSet& ks);

}  // namespace hbar::objectives
