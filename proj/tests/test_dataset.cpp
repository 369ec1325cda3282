// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>

#include "gensynth/dataset.hpp"
#include "helpers.hpp"

using namespace gensynth;

namespace {

void put_be32(std::string& s, std::uint32_t v) {
    for (int shift = 24; shift >= 0; shift -= 8) s.push_back(static_cast<char>((v >> shift) & 0xFF));
}

std::string idx_images(std::uint32_t n, std::uint32_t h, std::uint32_t w, unsigned char fill, std::uint32_t magic = 0x803) {
    std::string s;
    put_be32(s, magic);
    put_be32(s, n);
    put_be32(s, h);
    put_be32(s, w);
    s.append(static_cast<std::size_t>(n * h * w), static_cast<char>(fill));
    return s;
}

std::string idx_labels(std::uint32_t n, std::uint32_t magic = 0x801) {
    std::string s;
    put_be32(s, magic);
    put_be32(s, n);
    for (std::uint32_t i = 0; i < n; ++i) s.push_back(static_cast<char>(i % 3));
    return s;
}

}  // namespace

TEST_CASE("synth_blobs is deterministic and centred on the unit circle") {
    const auto a = synth_blobs(4, 200, 0.15, 7), b = synth_blobs(4, 200, 0.15, 7);
    CHECK(a == b);
    CHECK(a.size() == 800);
    CHECK(a.sample_shape() == TensorShape::flat(2));
    CHECK(a.digest() == b.digest());
    CHECK(synth_blobs(4, 200, 0.15, 8).digest() != a.digest());

    const auto tiny = synth_blobs(2, 1, 1e-12, 3);
    REQUIRE(tiny.size() == 2);
    const auto p = tiny.sample(0), q = tiny.sample(1);
    CHECK(std::hypot(p[0] - q[0], p[1] - q[1]) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(tiny.labels()[0] != tiny.labels()[1]);

    // Class means approach the circle centres.
    for (int c = 0; c < 4; ++c) {
        double mx = 0, my = 0;
        int n = 0;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (a.labels()[i] == c) {
                mx += a.sample(i)[0];
                my += a.sample(i)[1];
                ++n;
            }
        CHECK(mx / n == doctest::Approx(std::cos(2 * M_PI * c / 4)).epsilon(0.05).scale(1));
        CHECK(my / n == doctest::Approx(std::sin(2 * M_PI * c / 4)).epsilon(0.05).scale(1));
    }
}

TEST_CASE("synth_blobs rejects invalid parameters") {
    CHECK_THROWS_AS(synth_blobs(1, 10, 0.1, 1), DatasetError);
    CHECK_THROWS_AS(synth_blobs(3, 0, 0.1, 1), DatasetError);
    CHECK_THROWS_AS(synth_blobs(3, 10, 0.0, 1), DatasetError);
}

TEST_CASE("load_csv") {
    testing::TempDir dir("csv");
    SUBCASE("direct read") {
        testing::write_text(dir / "a.csv", "0,0,0\n1,1,1\n");
        const auto ds = load_csv(dir / "a.csv");
        CHECK(ds.size() == 2);
        CHECK(ds.sample_shape() == TensorShape::flat(2));
        CHECK(ds.num_classes() == 2);
    }
    SUBCASE("ragged row reports its line") {
        testing::write_text(dir / "b.csv", "0,0,0\n1,1,1\n2,1\n");
        try {
            load_csv(dir / "b.csv");
            FAIL("accepted");
        } catch (const DatasetError& e) {
            CHECK(e.line() == 3);
        }
    }
    SUBCASE("labels are remapped in ascending order") {
        testing::write_text(dir / "c.csv", "0.5,9\n0.1,5\n0.2,9\n");
        const auto ds = load_csv(dir / "c.csv");
        CHECK(ds.labels() == std::vector<int>{1, 0, 1});
        CHECK(ds.label_values() == std::vector<std::int64_t>{5, 9});
    }
    SUBCASE("non-numeric, non-finite and empty inputs") {
        testing::write_text(dir / "d.csv", "0,x,1\n");
        CHECK_THROWS_AS(load_csv(dir / "d.csv"), DatasetError);
        testing::write_text(dir / "e.csv", "nan,1\n");
        CHECK_THROWS_AS(load_csv(dir / "e.csv"), DatasetError);
        testing::write_text(dir / "f.csv", "");
        CHECK_THROWS_AS(load_csv(dir / "f.csv"), DatasetError);
        CHECK_THROWS_AS(load_csv(dir / "missing.csv"), DatasetError);
    }
}

TEST_CASE("load_idx") {
    testing::TempDir dir("idx");
    SUBCASE("header arithmetic and scaling") {
        testing::write_text(dir / "i", idx_images(3, 4, 4, 255));
        testing::write_text(dir / "l", idx_labels(3));
        const auto ds = load_idx(dir / "i", dir / "l");
        CHECK(ds.size() == 3);
        CHECK(ds.sample_shape() == TensorShape::image(1, 4, 4));
        CHECK(ds.sample(2)[15] == 1.0);
    }
    SUBCASE("count mismatch") {
        testing::write_text(dir / "i", idx_images(3, 4, 4, 7));
        testing::write_text(dir / "l", idx_labels(2));
        CHECK_THROWS_AS(load_idx(dir / "i", dir / "l"), DatasetError);
    }
    SUBCASE("bad magic and truncation") {
        testing::write_text(dir / "i", idx_images(3, 4, 4, 7, 0x802));
        testing::write_text(dir / "l", idx_labels(3));
        CHECK_THROWS_AS(load_idx(dir / "i", dir / "l"), DatasetError);
        auto cut = idx_images(3, 4, 4, 7);
        cut.resize(cut.size() - 1);
        testing::write_text(dir / "i", cut);
        CHECK_THROWS_AS(load_idx(dir / "i", dir / "l"), DatasetError);
    }
}

TEST_CASE("split") {
    const auto ds = synth_blobs(3, 37, 0.2, 4);
    SUBCASE("degenerate split keeps everything in train") {
        const auto s = split(ds, {1, 0, 0}, 1);
        CHECK(s.indices(Split::Train).size() == ds.size());
        CHECK(s.indices(Split::Val).empty());
    }
    SUBCASE("deterministic given seed") {
        CHECK(split(ds, {0.6, 0.2, 0.2}, 5).assignment() == split(ds, {0.6, 0.2, 0.2}, 5).assignment());
        CHECK(split(ds, {0.6, 0.2, 0.2}, 5).assignment() != split(ds, {0.6, 0.2, 0.2}, 6).assignment());
    }
    SUBCASE("fractions must sum to one") {
        CHECK_THROWS_AS(split(ds, {0.5, 0.5, 0.1}, 1), DatasetError);
        CHECK_THROWS_AS(split(ds, {1.2, -0.2, 0.0}, 1), DatasetError);
    }
    SUBCASE("stratification: every class within one sample of its share, totals within K") {
        const SplitFractions f{0.55, 0.3, 0.15};
        const auto s = split(ds, f, 9);
        for (int sp = 0; sp < 3; ++sp) {
            const auto idx = s.indices(static_cast<Split>(sp));
            CHECK(std::abs(static_cast<double>(idx.size()) - ds.size() * f[sp]) < 3);
            for (int c = 0; c < 3; ++c) {
                const auto in_class = std::count_if(idx.begin(), idx.end(), [&](auto i) { return s.labels()[i] == c; });
                CHECK(std::abs(static_cast<double>(in_class) - 37 * f[sp]) < 1.0 + 1e-12);
            }
        }
    }
}

TEST_CASE("datasets reject non-finite features and out-of-range labels") {
    CHECK_THROWS_AS(LabeledDataset(TensorShape::flat(1), {NAN}, {0}, 2), DatasetError);
    CHECK_THROWS_AS(LabeledDataset(TensorShape::flat(1), {INFINITY}, {0}, 2), DatasetError);
    CHECK_THROWS_AS(LabeledDataset(TensorShape::flat(1), {0.0}, {2}, 2), DatasetError);
    CHECK_THROWS_AS(LabeledDataset(TensorShape::flat(1), {}, {}, 2), DatasetError);
}
