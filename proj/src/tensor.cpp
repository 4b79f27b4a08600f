#include "hbar/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

namespace hbar {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const MatRM>;
using MutMap = Eigen::Map<MatRM>;

std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) os << 'x';
        os << s[i];
    }
    os << ']';
    return os.str();
}

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (auto d : s) n *= d;
    return n;
}

struct OpAccess {
    static const NodePtr& node(const Tensor& t) { return t.node_; }
    static Tensor wrap(NodePtr n) { return Tensor(std::move(n)); }
    static void record(Tape& tape, NodePtr n) { tape.nodes_.push_back(std::move(n)); }
};

namespace {

ConstMap map2d(const Node& n) {
    return ConstMap(n.value.data(), static_cast<Eigen::Index>(n.shape[0]),
                    static_cast<Eigen::Index>(n.shape[1]));
}

MutMap map2d_grad(Node& n) {
    n.ensure_grad();
    return MutMap(n.grad.data(), static_cast<Eigen::Index>(n.shape[0]),
                  static_cast<Eigen::Index>(n.shape[1]));
}

Tape* common_tape(const char* op, std::initializer_list<const Tensor*> xs) {
    Tape* tape = nullptr;
    for (const Tensor* x : xs) {
        Tape* xt = x->tape();
        if (!xt) continue;
        if (tape && xt != tape)
            throw ContractError(std::string(op) + ": operands belong to different tapes");
        tape = xt;
    }
    return tape;
}

/// Builds an op node; records it when gradients must flow.
Tensor make_op(const char* op, Shape shape, std::vector<double> value,
               std::initializer_list<const Tensor*> parents,
               std::function<void(Node&)> backprop) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(value);
    n->leaf = false;
    bool rg = false;
    for (const Tensor* p : parents) rg = rg || p->requires_grad();
    n->requires_grad = rg;
    Tape* tape = common_tape(op, parents);
    n->tape = tape;
    if (rg) {
        if (!tape)
            throw ContractError(std::string(op) +
                                ": gradient-requiring operands are not attached to a tape");
        n->backprop = std::move(backprop);
        OpAccess::record(*tape, n);
    }
    return OpAccess::wrap(std::move(n));
}

void require_2d(const char* op, const Tensor& t) {
    if (t.ndim() != 2)
        throw DimensionError(std::string(op) + ": expected a 2-d tensor, got " +
                             shape_str(t.shape()));
}

void require_finite(const char* op, const std::vector<double>& v, bool enabled) {
    if (!enabled) return;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i]))
            throw NumericError(std::string(op) + ": non-finite operand entry at index " +
                               std::to_string(i));
}

void check_one_hot(const char* op, const Node& y) {
    const std::size_t m = y.shape[0], k = y.shape[1];
    for (std::size_t i = 0; i < m; ++i) {
        int ones = 0;
        for (std::size_t j = 0; j < k; ++j) {
            double v = y.value[i * k + j];
            if (v == 1.0)
                ++ones;
            else if (v != 0.0)
                throw ContractError(std::string(op) + ": label row " + std::to_string(i) +
                                    " is not one-hot");
        }
        if (ones != 1)
            throw ContractError(std::string(op) + ": label row " + std::to_string(i) +
                                " is not one-hot");
    }
}

std::size_t one_hot_index(const Node& y, std::size_t row) {
    const std::size_t k = y.shape[1];
    for (std::size_t j = 0; j < k; ++j)
        if (y.value[row * k + j] == 1.0) return j;
    return 0;  // unreachable after check_one_hot
}

enum class BinOp { Add, Sub, Mul };

Tensor binary_elem(const char* op, const Tensor& a, const Tensor& b, BinOp kind) {
    const bool a_scalar = a.size() == 1, b_scalar = b.size() == 1;
    if (!(a.shape() == b.shape() || a_scalar || b_scalar))
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    const Shape out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
    const std::size_t n = shape_numel(out_shape);
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        double x = av[a_scalar ? 0 : i];
        double y = bv[b_scalar ? 0 : i];
        out[i] = kind == BinOp::Add ? x + y : kind == BinOp::Sub ? x - y : x * y;
    }
    NodePtr an = OpAccess::node(a), bn = OpAccess::node(b);
    return make_op(op, out_shape, std::move(out), {&a, &b},
                   [an, bn, kind, a_scalar, b_scalar](Node& o) {
                       const std::size_t n = o.value.size();
                       if (an->requires_grad) {
                           an->ensure_grad();
                           for (std::size_t i = 0; i < n; ++i) {
                               double g = o.grad[i];
                               if (kind == BinOp::Mul) g *= bn->value[b_scalar ? 0 : i];
                               an->grad[a_scalar ? 0 : i] += g;
                           }
                       }
                       if (bn->requires_grad) {
                           bn->ensure_grad();
                           for (std::size_t i = 0; i < n; ++i) {
                               double g = o.grad[i];
                               if (kind == BinOp::Sub)
                                   g = -g;
                               else if (kind == BinOp::Mul)
                                   g *= an->value[a_scalar ? 0 : i];
                               bn->grad[b_scalar ? 0 : i] += g;
                           }
                       }
                   });
}

Tensor unary_elem(const char* op, const Tensor& a, double (*fwd)(double),
                  double (*dfn)(double, double) /* (x, fx) -> df/dx */) {
    const std::size_t n = a.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a.data()[i]);
    NodePtr an = OpAccess::node(a);
    return make_op(op, a.shape(), std::move(out), {&a}, [an, dfn](Node& o) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o.value.size(); ++i)
            an->grad[i] += o.grad[i] * dfn(an->value[i], o.value[i]);
    });
}

}  // namespace

// ---- Tensor ---------------------------------------------------------------

Tensor Tensor::leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    for (auto d : shape)
        if (d == 0) throw DimensionError("leaf: zero dimension in shape " + shape_str(shape));
    if (shape_numel(shape) != data.size())
        throw DimensionError("leaf: shape " + shape_str(shape) + " wants " +
                             std::to_string(shape_numel(shape)) + " values, got " +
                             std::to_string(data.size()));
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(shape_numel(shape), 0.0);
    return leaf(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double v) { return leaf({1}, {v}); }

Tensor Tensor::full(Shape shape, double v) {
    std::vector<double> data(shape_numel(shape), v);
    return leaf(std::move(shape), std::move(data));
}

std::size_t Tensor::rows() const {
    require_2d("rows", *this);
    return node_->shape[0];
}

std::size_t Tensor::cols() const {
    require_2d("cols", *this);
    return node_->shape[1];
}

double Tensor::item() const {
    if (size() != 1)
        throw ContractError("item: tensor is not scalar, shape " + shape_str(shape()));
    return node_->value[0];
}

double Tensor::at(std::size_t r, std::size_t c) const {
    require_2d("at", *this);
    return node_->value[r * node_->shape[1] + c];
}

const std::vector<double>& Tensor::grad() const {
    node_->ensure_grad();
    return node_->grad;
}

void Tensor::zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

Tensor Tensor::clone_detached() const {
    auto n = std::make_shared<Node>();
    n->shape = node_->shape;
    n->value = node_->value;
    n->requires_grad = node_->requires_grad;
    return Tensor(std::move(n));
}

// ---- Tape -------------------------------------------------------------------

Tensor Tape::input(Shape shape, std::vector<double> data, bool requires_grad) {
    Tensor t = Tensor::leaf(std::move(shape), std::move(data), requires_grad);
    OpAccess::node(t)->tape = this;
    return t;
}

void Tape::backward(const Tensor& output) {
    if (!output.defined()) throw ContractError("backward: undefined output");
    if (output.size() != 1)
        throw ContractError("backward: output must be scalar, got shape " +
                            shape_str(output.shape()));
    const NodePtr& out = OpAccess::node(output);
    if (out->tape != this) throw ContractError("backward: output does not belong to this tape");
    // Interior grads are transient per sweep; leaf grads accumulate across sweeps.
    for (auto& n : nodes_) n->grad.assign(n->value.size(), 0.0);
    out->ensure_grad();
    out->grad[0] += 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        Node& n = **it;
        if (n.backprop) n.backprop(n);
    }
}

// ---- ops --------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_2d("matmul", a);
    require_2d("matmul", b);
    if (a.cols() != b.rows())
        throw DimensionError("matmul: inner dimensions disagree, " + shape_str(a.shape()) +
                             " vs " + shape_str(b.shape()));
    const auto m = a.rows(), n = b.cols();
    std::vector<double> out(m * n);
    {
        ConstMap A = map2d(*OpAccess::node(a)), B = map2d(*OpAccess::node(b));
        MutMap C(out.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
        C.noalias() = A * B;
    }
    NodePtr an = OpAccess::node(a), bn = OpAccess::node(b);
    return make_op("matmul", {m, n}, std::move(out), {&a, &b}, [an, bn](Node& o) {
        ConstMap G(o.grad.data(), static_cast<Eigen::Index>(o.shape[0]),
                   static_cast<Eigen::Index>(o.shape[1]));
        if (an->requires_grad) map2d_grad(*an).noalias() += G * map2d(*bn).transpose();
        if (bn->requires_grad) map2d_grad(*bn).noalias() += map2d(*an).transpose() * G;
    });
}

Tensor transpose(const Tensor& a) {
    require_2d("transpose", a);
    const auto m = a.rows(), n = a.cols();
    std::vector<double> out(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) out[j * m + i] = a.data()[i * n + j];
    NodePtr an = OpAccess::node(a);
    return make_op("transpose", {n, m}, std::move(out), {&a}, [an](Node& o) {
        an->ensure_grad();
        const std::size_t n = o.shape[0], m = o.shape[1];
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i < m; ++i) an->grad[i * n + j] += o.grad[j * m + i];
    });
}

Tensor add(const Tensor& a, const Tensor& b) { return binary_elem("add", a, b, BinOp::Add); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_elem("sub", a, b, BinOp::Sub); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_elem("mul", a, b, BinOp::Mul); }

Tensor neg(const Tensor& a) {
    return unary_elem("neg", a, [](double x) { return -x; },
                      [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double s) {
    const std::size_t n = a.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] * s;
    NodePtr an = OpAccess::node(a);
    return make_op("scale", a.shape(), std::move(out), {&a}, [an, s](Node& o) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o.value.size(); ++i) an->grad[i] += o.grad[i] * s;
    });
}

Tensor add_scalar(const Tensor& a, double s) {
    const std::size_t n = a.size();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = a.data()[i] + s;
    NodePtr an = OpAccess::node(a);
    return make_op("add_scalar", a.shape(), std::move(out), {&a}, [an](Node& o) {
        an->ensure_grad();
        for (std::size_t i = 0; i < o.value.size(); ++i) an->grad[i] += o.grad[i];
    });
}

Tensor exp_elem(const Tensor& a) {
    return unary_elem("exp", a, [](double x) { return std::exp(x); },
                      [](double, double fx) { return fx; });
}

Tensor relu(const Tensor& a) {
    return unary_elem("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor abs_elem(const Tensor& a) {
    return unary_elem("abs", a, [](double x) { return std::fabs(x); },
                      [](double x, double) { return x > 0.0 ? 1.0 : x < 0.0 ? -1.0 : 0.0; });
}

Tensor add_row_bias(const Tensor& m, const Tensor& bias) {
    require_2d("add_row_bias", m);
    if (bias.ndim() != 1 || bias.size() != m.cols())
        throw DimensionError("add_row_bias: bias " + shape_str(bias.shape()) +
                             " does not match matrix " + shape_str(m.shape()));
    const auto rows = m.rows(), cols = m.cols();
    std::vector<double> out(rows * cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            out[i * cols + j] = m.data()[i * cols + j] + bias.data()[j];
    NodePtr mn = OpAccess::node(m), bn = OpAccess::node(bias);
    return make_op("add_row_bias", {rows, cols}, std::move(out), {&m, &bias}, [mn, bn](Node& o) {
        const std::size_t rows = o.shape[0], cols = o.shape[1];
        if (mn->requires_grad) {
            mn->ensure_grad();
            for (std::size_t i = 0; i < rows * cols; ++i) mn->grad[i] += o.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < cols; ++j) bn->grad[j] += o.grad[i * cols + j];
        }
    });
}

Tensor softmax_rows(const Tensor& logits) {
    require_2d("softmax_rows", logits);
    const auto m = logits.rows(), k = logits.cols();
    std::vector<double> out(m * k);
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = logits.data().data() + i * k;
        double mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            out[i * k + j] = std::exp(row[j] - mx);
            sum += out[i * k + j];
        }
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] /= sum;
    }
    NodePtr ln = OpAccess::node(logits);
    return make_op("softmax_rows", {m, k}, std::move(out), {&logits}, [ln](Node& o) {
        ln->ensure_grad();
        const std::size_t m = o.shape[0], k = o.shape[1];
        for (std::size_t i = 0; i < m; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < k; ++j) dot += o.grad[i * k + j] * o.value[i * k + j];
            for (std::size_t j = 0; j < k; ++j)
                ln->grad[i * k + j] += o.value[i * k + j] * (o.grad[i * k + j] - dot);
        }
    });
}

Tensor sum_all(const Tensor& a, bool assert_finite) {
    require_finite("sum_all", a.data(), assert_finite);
    double s = 0.0;
    for (double v : a.data()) s += v;
    NodePtr an = OpAccess::node(a);
    return make_op("sum_all", {1}, {s}, {&a}, [an](Node& o) {
        an->ensure_grad();
        for (double& g : an->grad) g += o.grad[0];
    });
}

Tensor mean_all(const Tensor& a, bool assert_finite) {
    require_finite("mean_all", a.data(), assert_finite);
    double s = 0.0;
    for (double v : a.data()) s += v;
    const double inv = 1.0 / static_cast<double>(a.size());
    NodePtr an = OpAccess::node(a);
    return make_op("mean_all", {1}, {s * inv}, {&a}, [an, inv](Node& o) {
        an->ensure_grad();
        for (double& g : an->grad) g += o.grad[0] * inv;
    });
}

Tensor cross_entropy_mean(const Tensor& logits, const Tensor& y_onehot, bool assert_finite) {
    require_2d("cross_entropy_mean", logits);
    require_2d("cross_entropy_mean", y_onehot);
    if (logits.shape() != y_onehot.shape())
        throw DimensionError("cross_entropy_mean: logits " + shape_str(logits.shape()) +
                             " vs labels " + shape_str(y_onehot.shape()));
    require_finite("cross_entropy_mean", logits.data(), assert_finite);
    NodePtr ln = OpAccess::node(logits), yn = OpAccess::node(y_onehot);
    check_one_hot("cross_entropy_mean", *yn);
    const std::size_t m = logits.rows(), k = logits.cols();
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = logits.data().data() + i * k;
        double mx = row[0];
        for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
        const double lse = mx + std::log(sum);
        total += lse - row[one_hot_index(*yn, i)];
    }
    return make_op("cross_entropy_mean", {1}, {total / static_cast<double>(m)}, {&logits},
                   [ln, yn](Node& o) {
                       ln->ensure_grad();
                       const std::size_t m = ln->shape[0], k = ln->shape[1];
                       const double g = o.grad[0] / static_cast<double>(m);
                       for (std::size_t i = 0; i < m; ++i) {
                           const double* row = ln->value.data() + i * k;
                           double mx = row[0];
                           for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
                           double sum = 0.0;
                           for (std::size_t j = 0; j < k; ++j) sum += std::exp(row[j] - mx);
                           for (std::size_t j = 0; j < k; ++j) {
                               const double p = std::exp(row[j] - mx) / sum;
                               ln->grad[i * k + j] += g * (p - yn->value[i * k + j]);
                           }
                       }
                   });
}

Tensor cw_margin_mean(const Tensor& logits, const Tensor& y_onehot, bool assert_finite) {
    require_2d("cw_margin_mean", logits);
    if (logits.cols() < 2)
        throw ContractError("cw_margin_mean: needs at least 2 classes, got " +
                            std::to_string(logits.cols()));
    if (logits.shape() != y_onehot.shape())
        throw DimensionError("cw_margin_mean: logits " + shape_str(logits.shape()) +
                             " vs labels " + shape_str(y_onehot.shape()));
    require_finite("cw_margin_mean", logits.data(), assert_finite);
    NodePtr ln = OpAccess::node(logits), yn = OpAccess::node(y_onehot);
    check_one_hot("cw_margin_mean", *yn);
    const std::size_t m = logits.rows(), k = logits.cols();
    // Deterministic: the wrong-class max breaks ties toward the lowest index.
    auto best_wrong = [](const double* row, std::size_t k, std::size_t truth) {
        std::size_t best = truth == 0 ? 1 : 0;
        for (std::size_t j = 0; j < k; ++j)
            if (j != truth && row[j] > row[best]) best = j;
        return best;
    };
    double total = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double* row = logits.data().data() + i * k;
        const std::size_t t = one_hot_index(*yn, i);
        total += row[best_wrong(row, k, t)] - row[t];
    }
    return make_op("cw_margin_mean", {1}, {total / static_cast<double>(m)}, {&logits},
                   [ln, yn, best_wrong](Node& o) {
                       ln->ensure_grad();
                       const std::size_t m = ln->shape[0], k = ln->shape[1];
                       const double g = o.grad[0] / static_cast<double>(m);
                       for (std::size_t i = 0; i < m; ++i) {
                           const double* row = ln->value.data() + i * k;
                           const std::size_t t = one_hot_index(*yn, i);
                           ln->grad[i * k + best_wrong(row, k, t)] += g;
                           ln->grad[i * k + t] -= g;
                       }
                   });
}

Tensor gaussian_gram(const Tensor& x, double sigma) {
    require_2d("gaussian_gram", x);
    if (!(sigma > 0.0))
        throw ContractError("gaussian_gram: sigma must be positive, got " +
                            std::to_string(sigma));
    const std::size_t m = x.rows();
    const double inv_two_sigma_sq = 1.0 / (2.0 * sigma * sigma);
    std::vector<double> out(m * m);
    {
        ConstMap X = map2d(*OpAccess::node(x));
        MatRM G = X * X.transpose();
        // Squared distances from the Gram of inner products; computed on the
        // upper triangle and mirrored so K is exactly symmetric with unit diagonal.
        for (std::size_t i = 0; i < m; ++i) {
            out[i * m + i] = 1.0;
            for (std::size_t j = i + 1; j < m; ++j) {
                double d2 = G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) +
                            G(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) -
                            2.0 * G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                double kij = std::exp(-std::max(d2, 0.0) * inv_two_sigma_sq);
                out[i * m + j] = kij;
                out[j * m + i] = kij;
            }
        }
    }
    NodePtr xn = OpAccess::node(x);
    return make_op("gaussian_gram", {m, m}, std::move(out), {&x},
                   [xn, inv_two_sigma_sq](Node& o) {
                       const std::size_t m = o.shape[0];
                       // dD = -K .* dK / (2 sigma^2); with A = dD + dD^T the sample
                       // gradient is dX = 2 (diag(A 1) X - A X).
                       MatRM A(m, m);
                       for (std::size_t i = 0; i < m; ++i)
                           for (std::size_t j = 0; j < m; ++j) {
                               double dd_ij = -o.grad[i * m + j] * o.value[i * m + j] *
                                              inv_two_sigma_sq;
                               double dd_ji = -o.grad[j * m + i] * o.value[j * m + i] *
                                              inv_two_sigma_sq;
                               A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                                   dd_ij + dd_ji;
                           }
                       ConstMap X = map2d(*xn);
                       MutMap dX = map2d_grad(*xn);
                       Eigen::VectorXd row_sums = A.rowwise().sum();
                       dX.noalias() += 2.0 * (row_sums.asDiagonal() * X - A * X);
                   });
}

namespace {

/// out = H in H, in O(m^2): per-entry row mean, column mean and grand mean.
void center_square(const std::vector<double>& in, std::vector<double>& out, std::size_t m) {
    std::vector<double> row_mean(m, 0.0), col_mean(m, 0.0);
    double grand = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            const double v = in[i * m + j];
            row_mean[i] += v;
            col_mean[j] += v;
            grand += v;
        }
    const double inv = 1.0 / static_cast<double>(m);
    for (double& v : row_mean) v *= inv;
    for (double& v : col_mean) v *= inv;
    grand *= inv * inv;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j)
            out[i * m + j] = in[i * m + j] - row_mean[i] - col_mean[j] + grand;
}

}  // namespace

Tensor double_center(const Tensor& a) {
    require_2d("double_center", a);
    const std::size_t m = a.rows();
    if (a.cols() != m)
        throw DimensionError("double_center: expected a square matrix, got " +
                             shape_str(a.shape()));
    std::vector<double> out(m * m);
    center_square(a.data(), out, m);
    NodePtr an = OpAccess::node(a);
    return make_op("double_center", {m, m}, std::move(out), {&a}, [an, m](Node& o) {
        an->ensure_grad();
        std::vector<double> g(m * m);
        center_square(o.grad, g, m);
        for (std::size_t i = 0; i < m * m; ++i) an->grad[i] += g[i];
    });
}

}  // namespace hbar
