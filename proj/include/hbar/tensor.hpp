#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hbar/errors.hpp"

namespace hbar {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

class Tape;

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first needed; same length as value afterwards
    bool requires_grad = false;
    bool leaf = true;
    Tape* tape = nullptr;
    // Reads this node's grad and accumulates into the parents captured by the closure.
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

/// Dense real tensor, row-major, double precision.
///
/// A Tensor is a cheap handle sharing its underlying node; values are
/// immutable after construction except through mutable_data(), which the
/// trainer uses for parameter updates between tapes. Gradients live in a
/// separate buffer populated by Tape::backward.
class Tensor {
public:
    Tensor() = default;

    /// Free-standing leaf (network parameters, constants).
    static Tensor leaf(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor scalar(double v);
    static Tensor full(Shape shape, double v);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    std::size_t ndim() const { return node_->shape.size(); }
    /// Row/column counts; valid for 2-d tensors only.
    std::size_t rows() const;
    std::size_t cols() const;

    const std::vector<double>& data() const { return node_->value; }
    /// In-place access to values. Only meaningful for leaves between tapes
    /// (optimizer steps); never call on a tensor recorded by a live tape.
    std::vector<double>& mutable_data() { return node_->value; }

    double item() const;
    double at(std::size_t r, std::size_t c) const;

    bool requires_grad() const { return node_->requires_grad; }
    /// Gradient buffer (allocated zero-filled on first access).
    const std::vector<double>& grad() const;
    void zero_grad();

    Tape* tape() const { return node_->tape; }

    /// Deep copy with fresh storage; detached from any tape.
    Tensor clone_detached() const;

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;

    friend class Tape;
    friend struct OpAccess;
};

/// Records the operations of one forward pass and replays them in reverse
/// for gradient computation. Creation order is a topological order, so the
/// reverse sweep visits every node exactly once after all of its consumers.
///
/// A tape and all tensors recorded on it belong to a single thread.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    /// Leaf registered with this tape so downstream ops know where to record.
    Tensor input(Shape shape, std::vector<double> data, bool requires_grad = false);

    /// Populates grads of every requires_grad leaf reachable from `output`
    /// with d(output)/d(leaf). Output must be scalar. Leaf grads accumulate
    /// across repeated calls; interior grads are transient.
    void backward(const Tensor& output);

    std::size_t node_count() const { return nodes_.size(); }

private:
    std::vector<std::shared_ptr<detail::Node>> nodes_;
    friend struct OpAccess;
};

// ---- primitive operations -------------------------------------------------
// Each op computes its forward value eagerly and, when any operand requires
// gradients, records a backward closure on the operands' tape. Mixing tensors
// from two different tapes is an error.

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Elementwise; binary ops accept equal shapes or a scalar (size-1) operand.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor exp_elem(const Tensor& a);
Tensor relu(const Tensor& a);     // relu'(0) = 0
Tensor abs_elem(const Tensor& a); // d|x|/dx at 0 = 0

/// Adds a length-k bias vector to every row of an m-by-k matrix.
Tensor add_row_bias(const Tensor& m, const Tensor& bias);

/// Row-wise softmax, stabilized by row-max subtraction.
Tensor softmax_rows(const Tensor& logits);

// Reductions. With assert_finite set, a non-finite operand entry raises
// NumericError naming the operation.
Tensor sum_all(const Tensor& a, bool assert_finite = false);
Tensor mean_all(const Tensor& a, bool assert_finite = false);

/// Mean over rows of -log softmax(logits)[label]; labels given one-hot.
/// Gradient w.r.t. logits is (softmax - y)/m; y is treated as constant.
Tensor cross_entropy_mean(const Tensor& logits, const Tensor& y_onehot,
                          bool assert_finite = false);

/// Mean over rows of (max logit over wrong classes - true-class logit).
/// Ties in the wrong-class max break toward the lowest index.
Tensor cw_margin_mean(const Tensor& logits, const Tensor& y_onehot,
                      bool assert_finite = false);

/// m-by-m Gaussian Gram matrix K_ij = exp(-|x_i - x_j|^2 / (2 sigma^2))
/// of the rows of an m-by-d sample matrix; differentiable w.r.t. x.
Tensor gaussian_gram(const Tensor& x, double sigma);

/// H a H for a square matrix, H = I - (1/m) 1 1^T: subtracts row and column
/// means and restores the grand mean, in O(m^2). The map is self-adjoint, so
/// the backward pass centers the incoming gradient the same way.
Tensor double_center(const Tensor& a);

}  // namespace hbar
