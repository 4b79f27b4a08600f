#include "doctest.h"

#include "hbar/data.hpp"
#include "hbar/errors.hpp"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "support.hpp"

using namespace hbar;

namespace {

void put_u32_be(std::ofstream& out, std::uint32_t v) {
    const std::array<unsigned char, 4> b{static_cast<unsigned char>(v >> 24),
                                         static_cast<unsigned char>(v >> 16),
                                         static_cast<unsigned char>(v >> 8),
                                         static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b.data()), 4);
}

void write_images(const std::string& path, std::uint32_t magic, std::uint32_t n,
                  std::uint32_t rows, std::uint32_t cols,
                  const std::vector<unsigned char>& pixels) {
    std::ofstream out(path, std::ios::binary);
    put_u32_be(out, magic);
    put_u32_be(out, n);
    put_u32_be(out, rows);
    put_u32_be(out, cols);
    out.write(reinterpret_cast<const char*>(pixels.data()),
              static_cast<std::streamsize>(pixels.size()));
}

void write_labels(const std::string& path, std::uint32_t magic, std::uint32_t n,
                  const std::vector<unsigned char>& labels) {
    std::ofstream out(path, std::ios::binary);
    put_u32_be(out, magic);
    put_u32_be(out, n);
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

std::vector<std::size_t> class_counts(const data::Dataset& ds) {
    std::vector<std::size_t> counts(ds.classes(), 0);
    for (auto label : ds.y_index) ++counts[label];
    return counts;
}

bool same_row(const data::Dataset& a, std::size_t i, const data::Dataset& b,
              std::size_t j) {
    const std::size_t d = a.dim();
    return std::memcmp(a.x.data().data() + i * d, b.x.data().data() + j * d,
                       d * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("a hand-written idx pair loads with /255 scaling") {
    const std::string img = support::tmp_dir() + "/tiny-images-idx3-ubyte";
    const std::string lab = support::tmp_dir() + "/tiny-labels-idx1-ubyte";
    write_images(img, 2051, 2, 2, 2, {0, 255, 128, 64, 255, 0, 0, 0});
    write_labels(lab, 2049, 2, {3, 7});

    auto ds = data::load_idx(img, lab);
    CHECK(ds.n() == 2);
    CHECK(ds.dim() == 4);
    CHECK(ds.classes() == 10);
    CHECK(ds.x.at(0, 0) == 0.0);
    CHECK(ds.x.at(0, 1) == 1.0);
    CHECK(ds.x.at(0, 2) == doctest::Approx(128.0 / 255.0).epsilon(1e-15));
    CHECK(ds.x.at(1, 0) == 1.0);
    CHECK(ds.y_index == std::vector<std::size_t>{3, 7});
    CHECK(ds.y_onehot.at(0, 3) == 1.0);
    CHECK(ds.y_onehot.at(0, 0) == 0.0);
    CHECK(ds.y_onehot.at(1, 7) == 1.0);
    CHECK(ds.clamp_lo == 0.0);
    CHECK(ds.clamp_hi == 1.0);
    CHECK(!ds.synthetic);
}

TEST_CASE("malformed idx files are artifact errors") {
    const std::string img = support::tmp_dir() + "/bad-images";
    const std::string lab = support::tmp_dir() + "/bad-labels";

    SUBCASE("wrong image magic") {
        write_images(img, 2052, 1, 2, 2, {0, 0, 0, 0});
        write_labels(lab, 2049, 1, {1});
        CHECK_THROWS_AS(data::load_idx(img, lab), ArtifactError);
    }
    SUBCASE("wrong label magic") {
        write_images(img, 2051, 1, 2, 2, {0, 0, 0, 0});
        write_labels(lab, 2048, 1, {1});
        CHECK_THROWS_AS(data::load_idx(img, lab), ArtifactError);
    }
    SUBCASE("truncated pixel payload") {
        write_images(img, 2051, 2, 2, 2, {0, 0, 0, 0, 0});  // 5 of 8 bytes
        write_labels(lab, 2049, 2, {1, 2});
        CHECK_THROWS_AS(data::load_idx(img, lab), ArtifactError);
    }
    SUBCASE("image/label count mismatch") {
        write_images(img, 2051, 2, 2, 2, {0, 0, 0, 0, 0, 0, 0, 0});
        write_labels(lab, 2049, 3, {1, 2, 3});
        CHECK_THROWS_AS(data::load_idx(img, lab), ArtifactError);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(
            data::load_idx(support::tmp_dir() + "/no-such", support::tmp_dir() + "/nope"),
            ArtifactError);
    }
}

TEST_CASE("the packaged mnist training set loads" * doctest::timeout(120)) {
    const std::string dir = support::mnist_dir();
    auto ds = data::load_idx(dir + "/train-images-idx3-ubyte.gz",
                             dir + "/train-labels-idx1-ubyte.gz");
    CHECK(ds.n() == 60000);
    CHECK(ds.dim() == 784);
    CHECK(ds.classes() == 10);

    double lo = 1.0, hi = 0.0;
    for (double v : ds.x.data()) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo == 0.0);
    CHECK(hi == 1.0);

    const auto counts = class_counts(ds);
    for (auto c : counts) CHECK(c > 5000);

    SUBCASE("idx round-trip is bit-exact, plain and gzipped") {
        auto small = data::subset(ds, 60, 9, false);
        for (const char* suffix : {"", ".gz"}) {
            const std::string img = support::tmp_dir() + "/rt-images-idx3-ubyte" +
                                    std::string(suffix);
            const std::string lab = support::tmp_dir() + "/rt-labels-idx1-ubyte" +
                                    std::string(suffix);
            data::write_idx(small, img, lab);
            auto back = data::load_idx(img, lab);
            REQUIRE(back.n() == small.n());
            REQUIRE(back.dim() == small.dim());
            CHECK(std::memcmp(back.x.data().data(), small.x.data().data(),
                              small.x.size() * sizeof(double)) == 0);
            CHECK(back.y_index == small.y_index);
        }
    }

    SUBCASE("stratified subsets balance the classes") {
        auto sub = data::subset(ds, 1000, 4, true);
        CHECK(sub.n() == 1000);
        const auto sub_counts = class_counts(sub);
        std::size_t total = 0;
        for (auto c : sub_counts) {
            CHECK(c >= 99);
            CHECK(c <= 101);
            total += c;
        }
        CHECK(total == 1000);
    }
}

TEST_CASE("subset is seeded, size-checked and exhaustive at full size") {
    auto ds = data::synth_gaussian(40, 3, 1.0, 77);

    auto a = data::subset(ds, 15, 5, false);
    auto b = data::subset(ds, 15, 5, false);
    CHECK(std::memcmp(a.x.data().data(), b.x.data().data(),
                      a.x.size() * sizeof(double)) == 0);
    CHECK(a.y_index == b.y_index);

    auto c = data::subset(ds, 15, 6, false);
    CHECK(std::memcmp(a.x.data().data(), c.x.data().data(),
                      a.x.size() * sizeof(double)) != 0);

    auto full = data::subset(ds, 40, 1, false);
    CHECK(full.n() == 40);
    double want = 0.0, got = 0.0;
    for (double v : ds.x.data()) want += v;
    for (double v : full.x.data()) got += v;
    CHECK(got == doctest::Approx(want).epsilon(1e-12));

    CHECK_THROWS_AS(data::subset(ds, 41, 1, false), ConfigError);

    CHECK(a.clamp_lo == ds.clamp_lo);
    CHECK(a.synthetic == ds.synthetic);
}

TEST_CASE("take preserves rows in the requested order") {
    auto ds = data::synth_gaussian(10, 3, 1.0, 13);
    auto picked = ds.take({7, 2, 2});
    REQUIRE(picked.n() == 3);
    CHECK(same_row(picked, 0, ds, 7));
    CHECK(same_row(picked, 1, ds, 2));
    CHECK(same_row(picked, 2, ds, 2));
    CHECK(picked.y_index[0] == ds.y_index[7]);
    CHECK(picked.y_index[1] == ds.y_index[2]);
}

TEST_CASE("train/probe split is disjoint and sized as asked") {
    auto pool = data::synth_gaussian(200, 3, 1.0, 15);
    auto [train, probe] = data::split_train_probe(pool, 100, 50, 8, false);
    CHECK(train.n() == 100);
    CHECK(probe.n() == 50);
    // gaussian rows are distinct, so row equality means index overlap
    for (std::size_t i = 0; i < probe.n(); ++i)
        for (std::size_t j = 0; j < train.n(); ++j)
            CHECK(!same_row(probe, i, train, j));

    CHECK_THROWS_AS(data::split_train_probe(pool, 150, 51, 8, false), ConfigError);
}

TEST_CASE("synthetic gaussian matches its own law") {
    auto ds = data::synth_gaussian(2000, 5, 2.0, 19);
    CHECK(ds.n() == 2000);
    CHECK(ds.dim() == 5);
    CHECK(ds.classes() == 2);
    CHECK(ds.synthetic);
    CHECK(ds.clamp_lo < -1e30);
    CHECK(ds.clamp_hi > 1e30);

    for (std::size_t j = 0; j < 5; ++j) {
        double mean = 0.0, var = 0.0;
        for (std::size_t i = 0; i < ds.n(); ++i) mean += ds.x.at(i, j);
        mean /= static_cast<double>(ds.n());
        for (std::size_t i = 0; i < ds.n(); ++i) {
            const double c = ds.x.at(i, j) - mean;
            var += c * c;
        }
        var /= static_cast<double>(ds.n() - 1);
        CHECK(std::fabs(mean) < 0.15);
        CHECK(std::sqrt(var) == doctest::Approx(2.0).epsilon(0.08));
    }

    std::size_t ones = 0;
    for (std::size_t i = 0; i < ds.n(); ++i) {
        const std::size_t want = ds.x.at(i, 0) > 0.0 ? 1 : 0;
        CHECK(ds.y_index[i] == want);
        CHECK(ds.y_onehot.at(i, want) == 1.0);
        ones += ds.y_index[i];
    }
    CHECK(std::fabs(static_cast<double>(ones) / 2000.0 - 0.5) < 0.05);

    auto again = data::synth_gaussian(2000, 5, 2.0, 19);
    CHECK(std::memcmp(ds.x.data().data(), again.x.data().data(),
                      ds.x.size() * sizeof(double)) == 0);
    auto other = data::synth_gaussian(2000, 5, 2.0, 20);
    CHECK(std::memcmp(ds.x.data().data(), other.x.data().data(),
                      ds.x.size() * sizeof(double)) != 0);
}

TEST_CASE("synthetic labels follow a custom rule") {
    auto rule = +[](const double* row, std::size_t) -> std::size_t {
        return row[0] + row[1] > 0.0 ? 1u : 0u;
    };
    auto ds = data::synth_gaussian(300, 4, 1.0, 23, rule);
    for (std::size_t i = 0; i < ds.n(); ++i)
        CHECK(ds.y_index[i] == (ds.x.at(i, 0) + ds.x.at(i, 1) > 0.0 ? 1 : 0));
}

}  // TEST_SUITE
