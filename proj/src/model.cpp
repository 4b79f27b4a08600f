#include "hbar/model.hpp"

#include "hbar/errors.hpp"
#include "hbar/rng.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace hbar::model {

namespace {
constexpr const char* kCkptMagic = "HBAR-CKPT-v1";
}

std::size_t Network::in_dim() const {
    if (layers.empty()) throw ContractError("network has no layers");
    return layers.front().w.rows();
}

std::size_t Network::out_dim() const {
    if (layers.empty()) throw ContractError("network has no layers");
    return layers.back().w.cols();
}

std::vector<Tensor> Network::params() {
    std::vector<Tensor> out;
    out.reserve(layers.size() * 2);
    for (Layer& l : layers) {
        out.push_back(l.w);
        out.push_back(l.b);
    }
    return out;
}

Network Network::detached(bool requires_grad) const {
    Network copy;
    copy.layers.reserve(layers.size());
    for (const Layer& l : layers) {
        Tensor w = Tensor::leaf(l.w.shape(), l.w.data(), requires_grad);
        Tensor b = Tensor::leaf(l.b.shape(), l.b.data(), requires_grad);
        copy.layers.push_back({w, b, l.act});
    }
    return copy;
}

Network init(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    if (dims.size() < 2)
        throw ConfigError("network needs at least input and output dims, got " +
                          std::to_string(dims.size()));
    Rng rng(seed);
    Network net;
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const std::size_t d_in = dims[i], d_out = dims[i + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(d_in));
        std::vector<double> w(d_in * d_out);
        for (double& v : w) v = rng.uniform(-bound, bound);
        const bool last = i + 2 == dims.size();
        net.layers.push_back({Tensor::leaf({d_in, d_out}, std::move(w), true),
                              Tensor::zeros({d_out}, true),
                              last ? Activation::identity : Activation::relu});
    }
    return net;
}

ForwardTrace forward(const Network& net, const Tensor& x) {
    if (net.layers.empty()) throw ContractError("forward: network has no layers");
    if (x.ndim() != 2 || x.cols() != net.in_dim())
        throw DimensionError("forward: input " + shape_str(x.shape()) +
                             " does not match first layer input dim " +
                             std::to_string(net.in_dim()));
    ForwardTrace trace;
    trace.latents.reserve(net.layers.size());
    Tensor h = x;
    for (const Layer& l : net.layers) {
        h = add_row_bias(matmul(h, l.w), l.b);
        if (l.act == Activation::relu) h = relu(h);
        trace.latents.push_back(h);
    }
    trace.logits = trace.latents.back();
    return trace;
}

std::vector<std::size_t> predict_labels(const Tensor& logits) {
    const std::size_t m = logits.rows(), k = logits.cols();
    std::vector<std::size_t> out(m);
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 0; j < k; ++j) {
            const double v = logits.at(i, j);
            if (!std::isfinite(v))
                throw NumericError("predict_labels: non-finite logit at row " +
                                   std::to_string(i));
            if (v > logits.at(i, best)) best = j;
        }
        out[i] = best;
    }
    return out;
}

double accuracy(const Tensor& logits, const std::vector<std::size_t>& y_index) {
    if (y_index.size() != logits.rows())
        throw DimensionError("accuracy: " + std::to_string(y_index.size()) +
                             " labels for " + std::to_string(logits.rows()) + " rows");
    const auto pred = predict_labels(logits);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == y_index[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

namespace {

void write_values(std::FILE* f, const Tensor& t) {
    const auto& v = t.data();
    for (std::size_t i = 0; i < v.size(); ++i)
        std::fprintf(f, i ? " %.17g" : "%.17g", v[i]);
    std::fputc('\n', f);
}

}  // namespace

void save_checkpoint(const std::string& path, const Network& net, std::uint64_t seed,
                     std::size_t epoch) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw ArtifactError("cannot write checkpoint " + path);
    std::fprintf(f, "%s\n", kCkptMagic);
    std::fprintf(f, "dims");
    std::fprintf(f, " %zu", net.in_dim());
    for (const Layer& l : net.layers) std::fprintf(f, " %zu", l.w.cols());
    std::fprintf(f, "\nseed %" PRIu64 "\nepoch %zu\n", seed, epoch);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        std::fprintf(f, "w%zu ", i);
        write_values(f, net.layers[i].w);
        std::fprintf(f, "b%zu ", i);
        write_values(f, net.layers[i].b);
    }
    std::fprintf(f, "end\n");
    if (std::fclose(f) != 0) throw ArtifactError("failed to flush checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArtifactError("cannot open checkpoint " + path);
    std::string magic;
    if (!std::getline(in, magic) || magic != kCkptMagic)
        throw ArtifactError("checkpoint " + path + ": bad magic");

    auto bad = [&path](const std::string& what) {
        return ArtifactError("checkpoint " + path + ": " + what);
    };

    std::string tag;
    if (!(in >> tag) || tag != "dims") throw bad("missing dims");
    std::vector<std::size_t> dims;
    {
        std::string rest;
        std::getline(in, rest);
        std::istringstream ds(rest);
        std::size_t d;
        while (ds >> d) dims.push_back(d);
    }
    if (dims.size() < 2) throw bad("needs at least two dims");

    Checkpoint ck;
    if (!(in >> tag >> ck.seed) || tag != "seed") throw bad("missing seed");
    if (!(in >> tag >> ck.epoch) || tag != "epoch") throw bad("missing epoch");

    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
        const std::size_t d_in = dims[i], d_out = dims[i + 1];
        auto read_tensor = [&](const std::string& want, Shape shape) {
            if (!(in >> tag) || tag != want) throw bad("expected " + want);
            std::vector<double> v(shape_numel(shape));
            for (double& x : v)
                if (!(in >> x)) throw bad("truncated values for " + want);
            return Tensor::leaf(std::move(shape), std::move(v), true);
        };
        Tensor w = read_tensor("w" + std::to_string(i), {d_in, d_out});
        Tensor b = read_tensor("b" + std::to_string(i), {d_out});
        const bool last = i + 2 == dims.size();
        ck.net.layers.push_back({w, b, last ? Activation::identity : Activation::relu});
    }
    if (!(in >> tag) || tag != "end") throw bad("missing end marker");
    return ck;
}

}  // namespace hbar::model
