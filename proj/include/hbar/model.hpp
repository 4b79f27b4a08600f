#pragma once

#include "hbar/tensor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hbar::model {

enum class Activation { relu, identity };

struct Layer {
    Tensor w;  // d_in x d_out
    Tensor b;  // d_out
    Activation act = Activation::relu;
};

/// Feedforward classifier. The last layer emits logits (identity
/// activation); softmax lives in the loss.
struct Network {
    std::vector<Layer> layers;

    std::size_t depth() const { return layers.size(); }
    std::size_t in_dim() const;
    std::size_t out_dim() const;

    /// All parameter tensors in update order: w1, b1, w2, b2, ...
    std::vector<Tensor> params();

    /// Deep copy with fresh buffers; `requires_grad` set as given.
    Network detached(bool requires_grad) const;
};

/// Logits plus every per-layer post-activation latent; latents.back()
/// aliases logits.
struct ForwardTrace {
    Tensor logits;
    std::vector<Tensor> latents;
};

/// He-uniform weights (bound sqrt(6/d_in)), zero biases, relu hidden
/// activations, identity output. Deterministic in `seed`.
Network init(const std::vector<std::size_t>& dims, std::uint64_t seed);

ForwardTrace forward(const Network& net, const Tensor& x);

/// Row-wise argmax; ties break toward the lowest index. Throws on
/// non-finite logits.
std::vector<std::size_t> predict_labels(const Tensor& logits);

/// Fraction of rows whose argmax equals the given class index.
double accuracy(const Tensor& logits, const std::vector<std::size_t>& y_index);

struct Checkpoint {
    Network net;
    std::uint64_t seed = 0;
    std::size_t epoch = 0;
};

void save_checkpoint(const std::string& path, const Network& net, std::uint64_t seed,
                     std::size_t epoch);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hbar::model
