#include "hbar/objectives.hpp"

#include "hbar/errors.hpp"

#include <string>

namespace hbar::objectives {

Tensor cross_entropy(const Tensor& logits, const Tensor& y_onehot) {
    return cross_entropy_mean(logits, y_onehot);
}

namespace {

std::vector<Tensor> masked_latents(const model::ForwardTrace& trace,
                                   const std::vector<std::size_t>& mask) {
    if (mask.empty()) return trace.latents;
    std::vector<Tensor> out;
    out.reserve(mask.size());
    for (std::size_t layer : mask) {
        if (layer < 1 || layer > trace.latents.size())
            throw ConfigError("layer_mask entry " + std::to_string(layer) +
                              " outside 1.." + std::to_string(trace.latents.size()));
        out.push_back(trace.latents[layer - 1]);
    }
    return out;
}

void validate(const HbarConfig& cfg) {
    if (cfg.lambda_x < 0.0 || cfg.lambda_y < 0.0)
        throw ConfigError("hbar lambdas must be nonnegative");
    if (cfg.ce_weight < 0.0) throw ConfigError("ce_weight must be nonnegative");
}

Tensor sum_scalars(const std::vector<Tensor>& terms) {
    Tensor acc = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
    return acc;
}

/// Assembles the breakdown given the CE term and the trace whose latents
/// feed the HSIC sums (the natural-batch trace).
ObjectiveBreakdown assemble(const Tensor& ce, const model::ForwardTrace& natural_trace,
                            const Tensor& x, const Tensor& y, const HbarConfig& cfg,
                            const KernelSet& ks) {
    ObjectiveBreakdown out;
    out.ce = ce.item();
    Tensor total = scale(ce, cfg.ce_weight);

    const bool want_x = cfg.lambda_x != 0.0;
    const bool want_y = cfg.lambda_y != 0.0;
    if (want_x || want_y) {
        const auto latents = masked_latents(natural_trace, cfg.layer_mask);
        const auto hs = kernels::hsic_layers(x, y, latents, ks.x, ks.y, ks.z);
        for (const Tensor& t : hs.xz) out.hsic_xz.push_back(t.item());
        for (const Tensor& t : hs.yz) out.hsic_yz.push_back(t.item());
        if (want_x) {
            const Tensor sx = sum_scalars(hs.xz);
            out.sum_hsic_xz = sx.item();
            total = add(total, scale(sx, cfg.lambda_x));
        }
        if (want_y) {
            const Tensor sy = sum_scalars(hs.yz);
            out.sum_hsic_yz = sy.item();
            total = sub(total, scale(sy, cfg.lambda_y));
        }
    }
    out.total = total;
    return out;
}

}  // namespace

ObjectiveBreakdown hbar_objective(const model::Network& net, const Tensor& x,
                                  const Tensor& y, const HbarConfig& cfg,
                                  const KernelSet& ks) {
    validate(cfg);
    if (x.rows() < 2)
        throw ContractError("hbar_objective: batch too small, need m >= 2, got " +
                            std::to_string(x.rows()));
    const auto trace = model::forward(net, x);
    const Tensor ce = cross_entropy(trace.logits, y);
    return assemble(ce, trace, x, y, cfg, ks);
}

ObjectiveBreakdown hbar_adv_objective(const model::Network& net, const Tensor& x,
                                      const Tensor& y, const Tensor& x_adv,
                                      const HbarConfig& cfg, const KernelSet& ks) {
    validate(cfg);
    if (x_adv.shape() != x.shape())
        throw DimensionError("hbar_adv_objective: adversarial batch " +
                             shape_str(x_adv.shape()) + " does not match natural batch " +
                             shape_str(x.shape()));
    if (x.rows() < 2)
        throw ContractError("hbar_adv_objective: batch too small, need m >= 2, got " +
                            std::to_string(x.rows()));
    const auto adv_trace = model::forward(net, x_adv);
    const Tensor ce = cross_entropy(adv_trace.logits, y);
    if (cfg.lambda_x == 0.0 && cfg.lambda_y == 0.0) {
        // No natural forward pass needed.
        return assemble(ce, adv_trace, x, y, cfg, ks);
    }
    const auto natural_trace = model::forward(net, x);
    return assemble(ce, natural_trace, x, y, cfg, ks);
}

}  // namespace hbar::objectives
