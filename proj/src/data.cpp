#include "hbar/data.hpp"

#include "hbar/errors.hpp"
#include "hbar/rng.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>

namespace hbar::data {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;
constexpr std::size_t kMnistClasses = 10;

/// Reads a whole file through zlib, which inflates gzip content and passes
/// uncompressed bytes through untouched.
std::vector<unsigned char> read_file(const std::string& path) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw ArtifactError("cannot open " + path);
    std::vector<unsigned char> out;
    unsigned char buf[1 << 16];
    int got;
    while ((got = gzread(f, buf, sizeof buf)) > 0) out.insert(out.end(), buf, buf + got);
    const bool failed = got < 0;
    gzclose(f);
    if (failed) throw ArtifactError("failed to read " + path);
    return out;
}

std::uint32_t read_be32(const std::vector<unsigned char>& b, std::size_t at,
                        const std::string& path) {
    if (at + 4 > b.size()) throw ArtifactError(path + ": truncated header");
    return (std::uint32_t(b[at]) << 24) | (std::uint32_t(b[at + 1]) << 16) |
           (std::uint32_t(b[at + 2]) << 8) | std::uint32_t(b[at + 3]);
}

void write_be32(std::vector<unsigned char>& b, std::uint32_t v) {
    b.push_back(static_cast<unsigned char>(v >> 24));
    b.push_back(static_cast<unsigned char>(v >> 16));
    b.push_back(static_cast<unsigned char>(v >> 8));
    b.push_back(static_cast<unsigned char>(v));
}

void write_file(const std::string& path, const std::vector<unsigned char>& bytes) {
    const bool gz = path.size() > 3 && path.compare(path.size() - 3, 3, ".gz") == 0;
    gzFile f = gzopen(path.c_str(), gz ? "wb" : "wbT");  // T = store, no compression
    if (!f) throw ArtifactError("cannot write " + path);
    const unsigned len = static_cast<unsigned>(bytes.size());
    const bool ok = gzwrite(f, bytes.data(), len) == static_cast<int>(len);
    if (gzclose(f) != Z_OK || !ok) throw ArtifactError("failed to write " + path);
}

Tensor one_hot(const std::vector<std::size_t>& labels, std::size_t k) {
    std::vector<double> y(labels.size() * k, 0.0);
    for (std::size_t i = 0; i < labels.size(); ++i) y[i * k + labels[i]] = 1.0;
    return Tensor::leaf({labels.size(), k}, std::move(y));
}

}  // namespace

Dataset Dataset::take(const std::vector<std::size_t>& indices) const {
    const std::size_t d = dim(), k = classes();
    std::vector<double> xs(indices.size() * d);
    std::vector<std::size_t> labels(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const std::size_t src = indices[i];
        if (src >= n()) throw ContractError("take: index out of range");
        std::copy_n(x.data().begin() + src * d, d, xs.begin() + i * d);
        labels[i] = y_index[src];
    }
    Dataset out;
    out.x = Tensor::leaf({indices.size(), d}, std::move(xs));
    out.y_onehot = one_hot(labels, k);
    out.y_index = std::move(labels);
    out.split = split;
    out.clamp_lo = clamp_lo;
    out.clamp_hi = clamp_hi;
    out.synthetic = synthetic;
    return out;
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const auto img = read_file(images_path);
    const auto lab = read_file(labels_path);

    if (read_be32(img, 0, images_path) != kImagesMagic)
        throw ArtifactError(images_path + ": bad magic, not an IDX image file");
    if (read_be32(lab, 0, labels_path) != kLabelsMagic)
        throw ArtifactError(labels_path + ": bad magic, not an IDX label file");

    const std::size_t n = read_be32(img, 4, images_path);
    const std::size_t rows = read_be32(img, 8, images_path);
    const std::size_t cols = read_be32(img, 12, images_path);
    const std::size_t n_lab = read_be32(lab, 4, labels_path);
    if (n != n_lab)
        throw ArtifactError("image/label count mismatch: " + std::to_string(n) + " vs " +
                            std::to_string(n_lab));
    const std::size_t d = rows * cols;
    if (n == 0 || d == 0) throw ArtifactError(images_path + ": empty dataset");
    if (img.size() != 16 + n * d) throw ArtifactError(images_path + ": truncated pixel data");
    if (lab.size() != 8 + n) throw ArtifactError(labels_path + ": truncated label data");

    std::vector<double> xs(n * d);
    for (std::size_t i = 0; i < n * d; ++i) xs[i] = static_cast<double>(img[16 + i]) / 255.0;
    std::vector<std::size_t> labels(n);
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = lab[8 + i];
        if (labels[i] >= kMnistClasses)
            throw ArtifactError(labels_path + ": label " + std::to_string(labels[i]) +
                                " out of range at sample " + std::to_string(i));
    }

    Dataset ds;
    ds.x = Tensor::leaf({n, d}, std::move(xs));
    ds.y_onehot = one_hot(labels, kMnistClasses);
    ds.y_index = std::move(labels);
    return ds;
}

void write_idx(const Dataset& ds, const std::string& images_path,
               const std::string& labels_path) {
    const std::size_t n = ds.n(), d = ds.dim();
    const std::size_t rows = d == 784 ? 28 : 1;
    const std::size_t cols = d / rows;

    std::vector<unsigned char> img;
    img.reserve(16 + n * d);
    write_be32(img, kImagesMagic);
    write_be32(img, static_cast<std::uint32_t>(n));
    write_be32(img, static_cast<std::uint32_t>(rows));
    write_be32(img, static_cast<std::uint32_t>(cols));
    for (double v : ds.x.data()) {
        const long p = std::lround(v * 255.0);
        img.push_back(static_cast<unsigned char>(std::clamp(p, 0L, 255L)));
    }

    std::vector<unsigned char> lab;
    lab.reserve(8 + n);
    write_be32(lab, kLabelsMagic);
    write_be32(lab, static_cast<std::uint32_t>(n));
    for (std::size_t y : ds.y_index) {
        if (y > 255) throw ContractError("write_idx: label does not fit in a byte");
        lab.push_back(static_cast<unsigned char>(y));
    }

    write_file(images_path, img);
    write_file(labels_path, lab);
}

namespace {

/// Seeded permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng(seed);
    rng.shuffle(perm.begin(), perm.end());
    return perm;
}

/// Walks a permutation picking n_take samples; stratified selection fills
/// per-class quotas that differ by at most one.
std::vector<std::size_t> select(const Dataset& ds, const std::vector<std::size_t>& perm,
                                std::size_t n_take, bool stratified) {
    if (!stratified) return {perm.begin(), perm.begin() + n_take};
    const std::size_t k = ds.classes();
    std::vector<std::size_t> quota(k, n_take / k);
    for (std::size_t c = 0; c < n_take % k; ++c) ++quota[c];
    std::vector<std::size_t> out;
    out.reserve(n_take);
    for (std::size_t idx : perm) {
        std::size_t& q = quota[ds.y_index[idx]];
        if (q == 0) continue;
        --q;
        out.push_back(idx);
        if (out.size() == n_take) break;
    }
    if (out.size() != n_take)
        throw ConfigError("stratified subset: not enough samples of some class for " +
                          std::to_string(n_take));
    return out;
}

}  // namespace

Dataset subset(const Dataset& ds, std::size_t n_take, std::uint64_t seed, bool stratified) {
    if (n_take > ds.n())
        throw ConfigError("subset: asked for " + std::to_string(n_take) + " of " +
                          std::to_string(ds.n()) + " samples");
    const auto perm = permutation(ds.n(), seed);
    return ds.take(select(ds, perm, n_take, stratified));
}

std::pair<Dataset, Dataset> split_train_probe(const Dataset& ds, std::size_t n_train,
                                              std::size_t n_probe, std::uint64_t seed,
                                              bool stratified) {
    if (n_train + n_probe > ds.n())
        throw ConfigError("split: train " + std::to_string(n_train) + " + probe " +
                          std::to_string(n_probe) + " exceeds pool " +
                          std::to_string(ds.n()));
    const auto perm = permutation(ds.n(), seed);
    const auto train_idx = select(ds, perm, n_train, stratified);

    std::vector<bool> used(ds.n(), false);
    for (std::size_t i : train_idx) used[i] = true;
    std::vector<std::size_t> probe_idx;
    probe_idx.reserve(n_probe);
    for (std::size_t idx : perm) {
        if (used[idx]) continue;
        probe_idx.push_back(idx);
        if (probe_idx.size() == n_probe) break;
    }

    Dataset train = ds.take(train_idx);
    train.split = Dataset::Split::train;
    Dataset probe = ds.take(probe_idx);
    probe.split = Dataset::Split::probe;
    return {std::move(train), std::move(probe)};
}

namespace {
std::size_t sign_of_first(const double* row, std::size_t) { return row[0] > 0.0 ? 1 : 0; }
}  // namespace

Dataset synth_gaussian(std::size_t n, std::size_t d, double sigma, std::uint64_t seed,
                       Labeler labeler) {
    if (!(sigma > 0.0))
        throw ConfigError("synth_gaussian: sigma must be positive, got " +
                          std::to_string(sigma));
    if (n == 0 || d == 0) throw ConfigError("synth_gaussian: empty shape");
    if (!labeler) labeler = sign_of_first;

    Rng rng(seed);
    std::vector<double> xs(n * d);
    for (double& v : xs) v = sigma * rng.normal();

    std::vector<std::size_t> labels(n);
    std::size_t k = 2;
    for (std::size_t i = 0; i < n; ++i) {
        labels[i] = labeler(xs.data() + i * d, d);
        k = std::max(k, labels[i] + 1);
    }

    Dataset ds;
    ds.x = Tensor::leaf({n, d}, std::move(xs));
    ds.y_onehot = one_hot(labels, k);
    ds.y_index = std::move(labels);
    ds.clamp_lo = -std::numeric_limits<double>::infinity();
    ds.clamp_hi = std::numeric_limits<double>::infinity();
    ds.synthetic = true;
    return ds;
}

}  // namespace hbar::data
