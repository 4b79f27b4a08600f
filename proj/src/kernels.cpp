#include "hbar/kernels.hpp"

#include "hbar/errors.hpp"

#include <cmath>
#include <string>

namespace hbar::kernels {

KernelSpec KernelSpec::gaussian_scaled(double c) {
    if (!(c > 0.0))
        throw ConfigError("gaussian kernel: scale multiplier must be positive, got " +
                          std::to_string(c));
    return {Kind::gaussian, SigmaRule::scaled_sqrt_dim, c};
}

KernelSpec KernelSpec::gaussian_fixed(double sigma) {
    if (!(sigma > 0.0))
        throw ConfigError("gaussian kernel: sigma must be positive, got " +
                          std::to_string(sigma));
    return {Kind::gaussian, SigmaRule::fixed, sigma};
}

KernelSpec KernelSpec::linear() { return {Kind::linear, SigmaRule::fixed, 0.0}; }

double KernelSpec::resolve_sigma(std::size_t dim) const {
    if (kind != Kind::gaussian)
        throw ContractError("resolve_sigma: not a gaussian kernel");
    const double sigma = sigma_rule == SigmaRule::fixed
                             ? sigma_value
                             : sigma_value * std::sqrt(static_cast<double>(dim));
    if (!(sigma > 0.0))
        throw ConfigError("gaussian kernel: resolved sigma must be positive, got " +
                          std::to_string(sigma));
    return sigma;
}

GramMatrix gram(const Tensor& samples, const KernelSpec& spec) {
    if (samples.ndim() != 2)
        throw DimensionError("gram: samples must be 2-d, got " + shape_str(samples.shape()));
    const std::size_t m = samples.rows();
    if (m < 2) throw ContractError("gram: batch too small, need m >= 2, got " +
                                   std::to_string(m));
    Tensor k;
    if (spec.kind == KernelSpec::Kind::gaussian) {
        k = gaussian_gram(samples, spec.resolve_sigma(samples.cols()));
    } else {
        k = matmul(samples, transpose(samples));
    }
    return {k, spec, m};
}

Tensor centering(std::size_t m) {
    if (m < 1) throw ContractError("centering: m must be >= 1");
    const double off = -1.0 / static_cast<double>(m);
    std::vector<double> h(m * m, off);
    for (std::size_t i = 0; i < m; ++i) h[i * m + i] = 1.0 + off;
    return Tensor::leaf({m, m}, std::move(h));
}

namespace {

/// tr(Ca Cb) scaled by (m-1)^{-2} for already-centered symmetric Ca, Cb; the
/// trace collapses to an elementwise product sum. Centering both sides keeps
/// hsic exactly symmetric in its arguments (H is idempotent, so the extra H
/// pair changes nothing) and lets a constant variable cancel to exactly zero.
Tensor scaled_centered_trace(const Tensor& ca, const Tensor& cb, std::size_t m) {
    const double inv = 1.0 / (static_cast<double>(m - 1) * static_cast<double>(m - 1));
    return scale(sum_all(mul(ca, cb)), inv);
}

}  // namespace

Tensor hsic(const GramMatrix& ka, const GramMatrix& kb) {
    if (ka.m != kb.m)
        throw DimensionError("hsic: Gram sizes disagree, " + std::to_string(ka.m) + " vs " +
                             std::to_string(kb.m));
    return scaled_centered_trace(double_center(ka.values), double_center(kb.values), ka.m);
}

LayerHsic hsic_layers(const Tensor& x, const Tensor& y, const std::vector<Tensor>& latents,
                      const KernelSpec& x_spec, const KernelSpec& y_spec,
                      const KernelSpec& z_spec) {
    if (latents.empty()) throw ContractError("hsic_layers: no latents given");
    const std::size_t m = x.rows();
    if (y.rows() != m)
        throw DimensionError("hsic_layers: batch mismatch, x has " + std::to_string(m) +
                             " rows, y has " + std::to_string(y.rows()));
    for (const Tensor& z : latents)
        if (z.rows() != m)
            throw DimensionError("hsic_layers: latent batch " + std::to_string(z.rows()) +
                                 " does not match x batch " + std::to_string(m));

    // The centered input/label Grams are shared across layers.
    const Tensor cx = double_center(gram(x, x_spec).values);
    const Tensor cy = double_center(gram(y, y_spec).values);

    LayerHsic out;
    out.xz.reserve(latents.size());
    out.yz.reserve(latents.size());
    for (const Tensor& z : latents) {
        const Tensor cz = double_center(gram(z, z_spec).values);
        out.xz.push_back(scaled_centered_trace(cx, cz, m));
        out.yz.push_back(scaled_centered_trace(cy, cz, m));
    }
    return out;
}

}  // namespace hbar::kernels
