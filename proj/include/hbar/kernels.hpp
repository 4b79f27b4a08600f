#pragma once

#include "hbar/tensor.hpp"

#include <cstddef>
#include <vector>

namespace hbar::kernels {

/// Which kernel to apply and how a Gaussian bandwidth is chosen.
///
/// `scaled_sqrt_dim` resolves sigma as c·sqrt(d) at call time, with d the
/// feature dimension of the samples the kernel is applied to.
struct KernelSpec {
    enum class Kind { gaussian, linear };
    enum class SigmaRule { fixed, scaled_sqrt_dim };

    Kind kind = Kind::gaussian;
    SigmaRule sigma_rule = SigmaRule::scaled_sqrt_dim;
    double sigma_value = 5.0;  // the fixed sigma, or the multiplier c

    static KernelSpec gaussian_scaled(double c = 5.0);
    static KernelSpec gaussian_fixed(double sigma);
    static KernelSpec linear();

    /// Resolved bandwidth for `dim` features. Gaussian kernels only.
    double resolve_sigma(std::size_t dim) const;
};

/// An m x m kernel matrix together with the spec that produced it.
struct GramMatrix {
    Tensor values;
    KernelSpec spec;
    std::size_t m = 0;
};

/// Kernel matrix of a sample batch (rows are samples). Differentiable
/// w.r.t. `samples` when it participates in a tape.
GramMatrix gram(const Tensor& samples, const KernelSpec& spec);

/// The centering matrix H = I - (1/m) 1 1^T as a constant tensor.
Tensor centering(std::size_t m);

/// Empirical HSIC: (m-1)^{-2} tr(Ka H Kb H). Differentiable through both
/// Gram matrices.
Tensor hsic(const GramMatrix& ka, const GramMatrix& kb);

/// Per-layer HSIC terms of a forward trace: hsic(X, Z_j) and hsic(Y, Z_j)
/// for each latent, sharing the centered input/label Grams across layers.
struct LayerHsic {
    std::vector<Tensor> xz;
    std::vector<Tensor> yz;
};

LayerHsic hsic_layers(const Tensor& x, const Tensor& y,
                      const std::vector<Tensor>& latents, const KernelSpec& x_spec,
                      const KernelSpec& y_spec, const KernelSpec& z_spec);

}  // namespace hbar::kernels
