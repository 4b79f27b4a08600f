#pragma once

#include "hbar/data.hpp"
#include "hbar/model.hpp"
#include "hbar/rng.hpp"
#include "hbar/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <string>
#include <vector>

#include "oracles.hpp"

namespace support {

inline hbar::Tensor matrix(std::size_t r, std::size_t c, std::vector<double> v,
                           bool requires_grad = false) {
    return hbar::Tensor::leaf({r, c}, std::move(v), requires_grad);
}

inline oracle::Rows to_rows(const hbar::Tensor& t) {
    oracle::Rows rows(t.rows(), std::vector<double>(t.cols()));
    for (std::size_t i = 0; i < t.rows(); ++i)
        for (std::size_t j = 0; j < t.cols(); ++j) rows[i][j] = t.at(i, j);
    return rows;
}

inline hbar::Tensor from_rows(const oracle::Rows& rows, bool requires_grad = false) {
    std::vector<double> flat;
    flat.reserve(rows.size() * rows.front().size());
    for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
    return matrix(rows.size(), rows.front().size(), std::move(flat), requires_grad);
}

inline oracle::Rows random_rows(std::size_t m, std::size_t d, hbar::Rng& rng,
                                double lo = -1.0, double hi = 1.0) {
    oracle::Rows rows(m, std::vector<double>(d));
    for (auto& r : rows)
        for (auto& v : r) v = rng.uniform(lo, hi);
    return rows;
}

inline std::vector<double> random_vec(std::size_t n, hbar::Rng& rng, double lo = -1.0,
                                      double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

// One-hot row matrix for the given labels.
inline hbar::Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t k) {
    std::vector<double> v(labels.size() * k, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) v[i * k + labels[i]] = 1.0;
    return matrix(labels.size(), k, std::move(v));
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
    return m;
}

inline double max_abs(const std::vector<double>& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::fabs(v));
    return m;
}

// Relative error between an analytic gradient and a reference, normalized by
// the reference's largest entry.
inline double grad_rel_err(const std::vector<double>& got, const std::vector<double>& ref) {
    return max_abs_diff(got, ref) / std::max(max_abs(ref), 1e-8);
}

// Labeled dataset wrapper around raw rows.
inline hbar::data::Dataset make_dataset(const oracle::Rows& rows,
                                        const std::vector<std::size_t>& labels,
                                        std::size_t k) {
    hbar::data::Dataset ds;
    ds.x = from_rows(rows);
    ds.y_onehot = one_hot(labels, k);
    ds.y_index = labels;
    return ds;
}

// Compile-time configured paths (set by the build).
inline std::string tmp_dir() {
#ifdef HBAR_TMP_DIR
    return HBAR_TMP_DIR;
#else
    return "/tmp";
#endif
}

inline std::string cli_path() {
#ifdef HBAR_CLI_PATH
    return HBAR_CLI_PATH;
#else
    return "";
#endif
}

inline std::string mnist_dir() {
    if (const char* env = std::getenv("HBAR_DATA_DIR")) return env;
#ifdef HBAR_DATA_ROOT
    return HBAR_DATA_ROOT;
#else
    return "data/mnist";
#endif
}

}  // namespace support
