// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "gensynth/rng.hpp"
#include "gensynth/selfcheck.hpp"
#include "gensynth/trainer.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace gensynth;

namespace {

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d;
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

LabeledDataset blobs_split(int k, int n, double sigma, std::uint64_t seed) {
    return split(synth_blobs(k, n, sigma, seed), {0.8, 0.2, 0.0}, 0);
}

}  // namespace

TEST_CASE("init_weights: determinism, layout, bounds, zero biases") {
    const auto g = testing::mlp(4, {}, 3);
    const auto a = init_weights(g, 17), b = init_weights(g, 17);
    CHECK(a == b);
    CHECK(!(a == init_weights(g, 18)));
    const auto& head = a.layers[g.index_of("head")];
    CHECK(head.weight.size() == 12);
    CHECK(head.bias == std::vector<double>(3, 0.0));

    const auto k = selfcheck::every_kind_network();
    const auto w = init_weights(k, 4);
    for (std::size_t i = 0; i < k.vertices().size(); ++i) {
        const auto& v = k.vertices()[i];
        if (!v.trainable()) {
            CHECK(w.layers[i].weight.empty());
            continue;
        }
        const auto in = k.input_shape_of(i);
        const double fan_in = v.kind == OpKind::Dense ? static_cast<double>(in.size())
                                                      : static_cast<double>(in[0] * v.kernel * v.kernel);
        const double bound = std::sqrt(6.0 / fan_in);
        for (double x : w.layers[i].weight) CHECK(std::abs(x) <= bound);
    }
}

TEST_CASE("forward agrees with the reference pass on every vertex kind") {
    const auto g = selfcheck::every_kind_network();
    const auto w = init_weights(g, 8);
    const std::size_t batch = 5, d = static_cast<std::size_t>(g.input_shape().size());
    const auto x = gaussian(batch * d, 3);
    const auto r = forward(g, w, x, batch);
    CHECK(r.batch == batch);
    CHECK(r.output.size() == batch * 3);
    for (std::size_t n = 0; n < batch; ++n) {
        const auto ref = oracle::forward(g, w, std::vector<double>(x.begin() + n * d, x.begin() + (n + 1) * d));
        double row = 0;
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(r.output[n * 3 + c] == doctest::Approx(ref.output[c]).epsilon(1e-12));
            row += r.output[n * 3 + c];
        }
        CHECK(std::abs(row - 1.0) < 1e-6);
        for (std::size_t i = 0; i < g.vertices().size(); ++i) {
            const auto& act = ref.activations.at(g.vertices()[i].id);
            const auto& got = r.activations[i];
            REQUIRE(got.size() == batch * act.size());
            for (std::size_t j = 0; j < act.size(); ++j)
                CHECK(got[n * act.size() + j] == doctest::Approx(act[j]).epsilon(1e-12));
        }
    }
}

TEST_CASE("forward edge cases") {
    const auto g = testing::mlp(3, {4}, 5);
    SUBCASE("all-zero weights give a uniform softmax") {
        auto w = init_weights(g, 1);
        for (auto& l : w.layers) std::fill(l.weight.begin(), l.weight.end(), 0.0);
        const auto r = forward(g, w, gaussian(6, 2), 2);
        for (double p : r.output) CHECK(p == doctest::Approx(0.2).epsilon(1e-15));
    }
    SUBCASE("ReLU on negative pre-activations is zero") {
        auto w = init_weights(g, 1);
        auto& fc = w.layers[g.index_of("fc1")];
        std::fill(fc.weight.begin(), fc.weight.end(), 0.0);
        std::fill(fc.bias.begin(), fc.bias.end(), -1.0);
        const auto r = forward(g, w, gaussian(9, 2), 3);
        for (double a : r.activations[g.index_of("relu1")]) CHECK(a == 0.0);
    }
    SUBCASE("batch of B samples yields B rows") {
        const auto r = forward(g, init_weights(g, 1), gaussian(21, 2), 7);
        CHECK(r.output.size() == 7 * 5);
        CHECK(r.logits.size() == 7 * 5);
    }
    SUBCASE("non-finite input is reported with a vertex id") {
        auto x = gaussian(3, 2);
        x[1] = INFINITY;
        try {
            forward(g, init_weights(g, 1), x, 1);
            FAIL("accepted");
        } catch (const DivergenceError& e) {
            CHECK(!e.vertex().empty());
        }
    }
}

TEST_CASE("loss matches the reference cross-entropy") {
    const auto g = selfcheck::every_kind_network();
    const auto w = init_weights(g, 2);
    const auto x = gaussian(4 * 72, 5);
    const std::vector<int> y{0, 2, 1, 2};
    CHECK(loss_and_gradient(g, w, x, y).loss == doctest::Approx(oracle::reference_loss(g, w, x, y)).epsilon(1e-12));
}

TEST_CASE("gradient check on every vertex kind") {
    const auto g = selfcheck::every_kind_network();
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto w = init_weights(g, seed);
        const auto x = gaussian(4 * 72, seed + 10);
        const std::vector<int> y{0, 1, 2, 1};
        const auto r = grad_check(g, w, x, y, 1e-5, seed);
        CAPTURE(seed);
        CHECK(r.coordinates >= 50);
        CHECK(r.max_relative_error < 1e-4);
        CHECK(r.kinks == 0);
    }
}

TEST_CASE("gradient check on the reference MLP at two step sizes") {
    const auto g = testing::reference_prototype();
    const auto w = init_weights(g, 6);
    const auto x = gaussian(16 * 2, 7);
    std::vector<int> y(16);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 4);
    const auto r1 = grad_check(g, w, x, y, 1e-5, 1);
    const auto r2 = grad_check(g, w, x, y, 2e-5, 1);
    CHECK(r1.coordinates == 4 * 50);
    CHECK(r1.max_relative_error < 1e-4);
    CHECK(r2.max_relative_error < 1e-4);
    // Few sampled coordinates sit within a step of a ReLU switch.
    CHECK(r1.kinks <= 2);
    CHECK(r2.kinks <= 2);
}

TEST_CASE("dead unit: analytic and numeric gradients are both zero") {
    const auto g = testing::mlp(2, {3}, 2);
    auto w = init_weights(g, 1);
    auto& fc = w.layers[g.index_of("fc1")];
    for (std::size_t i = 0; i < 2; ++i) fc.weight[i * 3] = 0.0;
    fc.bias[0] = -5.0;
    const auto x = gaussian(8, 1);
    const std::vector<int> y{0, 1, 1, 0};
    const auto grad = loss_and_gradient(g, w, x, y).grad;
    CHECK(grad.layers[g.index_of("fc1")].bias[0] == 0.0);
    CHECK(grad_check(g, w, x, y, 1e-5).max_relative_error < 1e-4);
}

TEST_CASE("zero epochs leave accuracy within the chance interval") {
    // A random network sends each well-separated blob to one class, so a single
    // initialization scores a multiple of roughly 1/K. Labels are exchangeable
    // under the initializer, so the mean over initializations sits at chance.
    const auto ds = blobs_split(4, 250, 0.15, 11);
    const auto n_val = static_cast<int>(ds.indices(Split::Val).size());
    const auto [lo, hi] = oracle::binomial_interval(n_val, 0.25, 0.99);
    const auto g = testing::reference_prototype();
    constexpr int kInits = 100;
    double mean = 0;
    for (int s = 1; s <= kInits; ++s) {
        TrainConfig cfg;
        cfg.epochs = 0;
        cfg.seed = static_cast<std::uint64_t>(s);
        const auto r = train(g, ds, cfg);
        REQUIRE(r.val);
        CHECK(r.weights == init_weights(g, derive_seed(cfg.seed, {tag("weights")})));
        mean += r.val->accuracy / kInits;
    }
    CAPTURE(mean);
    CHECK(mean * n_val >= lo);
    CHECK(mean * n_val <= hi);
}

TEST_CASE("reference separable task: two blobs, MLP 2-16-2") {
    const auto ds = blobs_split(2, 200, 0.1, 5);
    const auto g = testing::mlp(2, {16}, 2);
    TrainConfig cfg;
    cfg.epochs = 30;
    const auto a = train(g, ds, cfg);
    REQUIRE(a.val);
    CHECK(a.val->accuracy >= 0.95);
    CHECK(a.final_train_loss < a.initial_train_loss);
    const auto b = train(g, ds, cfg);
    CHECK(a.weights == b.weights);
    CHECK(a.val->loss == b.val->loss);
}

TEST_CASE("evaluate") {
    const auto ds = blobs_split(2, 50, 0.05, 2);
    const auto g = testing::mlp(2, {8}, 2);
    SUBCASE("trained network gets everything right") {
        TrainConfig cfg;
        cfg.epochs = 20;
        const auto r = train(g, ds, cfg);
        CHECK(evaluate(g, r.weights, ds, Split::Val).accuracy == 1.0);
    }
    SUBCASE("uniform logits predict class 0") {
        auto w = init_weights(g, 1);
        for (auto& l : w.layers) std::fill(l.weight.begin(), l.weight.end(), 0.0);
        const auto val = ds.indices(Split::Val);
        const auto zeros = std::count_if(val.begin(), val.end(), [&](auto i) { return ds.labels()[i] == 0; });
        CHECK(evaluate(g, w, ds, Split::Val).accuracy == doctest::Approx(double(zeros) / val.size()));
    }
    SUBCASE("empty split") {
        CHECK_THROWS_AS(evaluate(g, init_weights(g, 1), ds, Split::Test), DatasetError);
    }
}

TEST_CASE("divergence is reported with its epoch") {
    const auto ds = blobs_split(2, 50, 0.1, 2);
    TrainConfig cfg;
    cfg.learning_rate = 1e200;
    try {
        train(testing::mlp(2, {8}, 2), ds, cfg);
        FAIL("training did not diverge");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() >= 0);
    }
}

TEST_CASE("TrainConfig validation names the field") {
    TrainConfig cfg;
    cfg.momentum = 1.0;
    try {
        cfg.validate();
        FAIL("accepted");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "momentum");
    }
    cfg = {};
    cfg.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.learning_rate = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
