#pragma once

#include "hbar/tensor.hpp"

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace hbar::data {

/// An immutable labeled sample set. `x` is n x d with one row per sample;
/// labels are carried both one-hot and as indices.
struct Dataset {
    Tensor x;
    Tensor y_onehot;
    std::vector<std::size_t> y_index;

    enum class Split { train, test, probe } split = Split::train;

    // Valid input range for attacks; synthetic data is unbounded.
    double clamp_lo = 0.0;
    double clamp_hi = 1.0;
    bool synthetic = false;

    std::size_t n() const { return y_index.size(); }
    std::size_t dim() const { return x.cols(); }
    std::size_t classes() const { return y_onehot.cols(); }

    /// New dataset holding the given rows, in the given order.
    Dataset take(const std::vector<std::size_t>& indices) const;
};

/// Load an IDX image/label file pair. Pixels are scaled to [0,1] by /255
/// and labels one-hot encoded over 10 classes. Files whose content is
/// gzip-compressed (conventionally *.gz) are inflated transparently.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Write a dataset back to the IDX pair (28x28 images when d==784, else a
/// single row of d pixels). Paths ending in .gz are written compressed.
/// Pixels are rounded to the nearest of the 256 levels, so a dataset that
/// came from load_idx round-trips bit-exactly.
void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path);

/// Seeded selection of n_take samples without replacement. Stratified
/// selection keeps per-class counts within +-1 of n_take/k.
Dataset subset(const Dataset& ds, std::size_t n_take, std::uint64_t seed, bool stratified);

/// Disjoint train/probe selections from one pool: the probe is drawn from
/// the indices the train selection did not use.
std::pair<Dataset, Dataset> split_train_probe(const Dataset& ds, std::size_t n_train,
                                              std::size_t n_probe, std::uint64_t seed,
                                              bool stratified);

/// Deterministic labeling rule for synthetic data.
using Labeler = std::size_t (*)(const double* row, std::size_t d);

/// X ~ N(0, sigma^2 I) i.i.d., labels from `labeler` (default: class 1 iff
/// the first coordinate is positive). Unbounded clamp range.
Dataset synth_gaussian(std::size_t n, std::size_t d, double sigma, std::uint64_t seed,
                       Labeler labeler = nullptr);

}  // namespace hbar::data
