// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <random>

#include <nlohmann/json.hpp>

#include "gensynth/generator.hpp"
#include "gensynth/rng.hpp"
#include "helpers.hpp"

using namespace gensynth;

namespace {

Generator with_logits(const NetworkGraph& proto, std::vector<double> logits) {
    return Generator(proto, GeneratorParams{std::move(logits), prototype_digest(proto)}, MetricConfig{},
                     RequirementSpec{});
}

}  // namespace

TEST_CASE("init_generator binds the prototype") {
    const auto proto = testing::reference_prototype();
    const auto gen = init_generator(proto, RequirementSpec{}, MetricConfig{});
    CHECK(gen.params().retention_logits.size() == 192);
    CHECK(gen.params().retention_logits.front() == 2.0);
    CHECK(gen.params().prototype_digest == prototype_digest(proto));

    auto params = gen.params();
    params.prototype_digest = prototype_digest(testing::mlp(2, {64, 64, 63}, 4));
    CHECK_THROWS_AS(Generator(proto, params, MetricConfig{}, RequirementSpec{}), ConfigError);
    params = gen.params();
    params.retention_logits.pop_back();
    CHECK_THROWS_AS(Generator(proto, params, MetricConfig{}, RequirementSpec{}), ConfigError);
    params = gen.params();
    params.retention_logits[3] = NAN;
    CHECK_THROWS_AS(Generator(proto, params, MetricConfig{}, RequirementSpec{}), ConfigError);
}

TEST_CASE("saturated generators") {
    const auto proto = testing::reference_prototype();
    SUBCASE("high logits reproduce the prototype for every seed") {
        const auto gen = init_generator(proto, RequirementSpec{}, MetricConfig{}, 50.0);
        for (std::uint64_t s = 0; s < 20; ++s) CHECK(sample(gen, Seed{s}) == proto);
        CHECK(expected_params(gen) == doctest::Approx(count_params(proto)).epsilon(1e-6));
    }
    SUBCASE("low logits leave exactly one unit per prunable layer") {
        const auto gen = init_generator(proto, RequirementSpec{}, MetricConfig{}, -50.0);
        for (std::uint64_t s = 0; s < 20; ++s) {
            const auto g = sample(gen, Seed{s});
            for (std::size_t i = 0; i < g.vertices().size(); ++i)
                if (g.prunable_units(i) > 0) CHECK(g.vertices()[i].units == 1);
            CHECK(g.vertices()[g.head_index()].units == 4);
        }
    }
}

TEST_CASE("sample keeps a unit when its keep probability exceeds its stream draw") {
    const auto proto = testing::mlp(3, {6, 5}, 2);
    std::mt19937_64 rng(4);
    std::normal_distribution<double> d(0, 2);
    std::vector<double> logits(11);
    for (auto& x : logits) x = d(rng);
    const auto gen = with_logits(proto, logits);
    for (std::uint64_t s = 100; s < 140; ++s) {
        const auto sm = sample_with_mask(gen, Seed{s});
        const auto a = sample(gen, Seed{s});
        CHECK(serialize(a) == serialize(sample(gen, Seed{s})));
        CHECK(sm.graph == a);
        for (std::size_t u = 0; u < 11; ++u) {
            const bool draw = sigmoid(logits[u]) > stream_uniform(s, u);
            if (draw) CHECK(sm.mask[u]);
        }
        // Extra keeps only come from the floor rule: at most one per layer.
        for (auto [lo, hi] : {std::pair<std::size_t, std::size_t>{0, 6}, {6, 11}}) {
            int extra = 0, kept = 0;
            for (std::size_t u = lo; u < hi; ++u) {
                extra += sm.mask[u] && !(sigmoid(logits[u]) > stream_uniform(s, u));
                kept += sm.mask[u];
            }
            CHECK(extra <= 1);
            CHECK(kept >= 1);
            if (extra == 1) CHECK(kept == 1);
        }
        CHECK(count_params(a) <= count_params(proto));
        CHECK(count_macs(a) <= count_macs(proto));
    }
}

TEST_CASE("apply_delta") {
    const auto proto = testing::mlp(2, {3}, 2);
    const auto gen = with_logits(proto, {0.1, -0.2, 0.3});
    CHECK(apply_delta(gen, ParamDelta{{0, 0, 0}}).params() == gen.params());
    const auto up = apply_delta(gen, ParamDelta{{100, -100, 1}});
    CHECK(up.params().retention_logits == std::vector<double>{50, -50, 1.3});
    CHECK(up.prototype() == gen.prototype());
    CHECK_THROWS_AS(apply_delta(gen, ParamDelta{{0, 0}}), Error);
    CHECK_THROWS_AS(apply_delta(gen, ParamDelta{{0, NAN, 0}}), Error);
}

TEST_CASE("expected_params against a Monte-Carlo estimate over masks") {
    // Input(2) -> Dense(4) -> ReLU -> Dense(3) -> ReLU -> head Dense(2).
    const auto proto = testing::mlp(2, {4, 3}, 2);
    const auto gen = with_logits(proto, std::vector<double>(7, 0.0));
    // The 4->3 layer alone: 4*0.5*3*0.5 weights + 1.5 biases.
    const double layer = 4 * 0.5 * 3 * 0.5 + 1.5;
    const double analytic = (2 * 2.0 + 2.0) + layer + (1.5 * 2 + 2);
    CHECK(expected_params(gen) == doctest::Approx(analytic).epsilon(1e-12));

    std::mt19937_64 rng(77);
    std::bernoulli_distribution keep(0.5);
    constexpr int draws = 200'000;
    double total = 0, middle = 0;
    for (int k = 0; k < draws; ++k) {
        int w1 = 0, w2 = 0;
        for (int u = 0; u < 4; ++u) w1 += keep(rng);
        for (int u = 0; u < 3; ++u) w2 += keep(rng);
        middle += w1 * w2 + w2;
        total += 2 * w1 + w1 + w1 * w2 + w2 + w2 * 2 + 2;
    }
    CHECK(middle / draws == doctest::Approx(layer).epsilon(0.02));
    CHECK(total / draws == doctest::Approx(expected_params(gen)).epsilon(0.02));
}

TEST_CASE("expected_params is monotone in every logit") {
    const auto proto = testing::mlp(3, {5, 4}, 3);
    std::mt19937_64 rng(12);
    std::normal_distribution<double> d(0, 3);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> logits(9);
        for (auto& x : logits) x = d(rng);
        const double base = expected_params(with_logits(proto, logits));
        const auto u = static_cast<std::size_t>(rng() % 9);
        logits[u] += std::abs(d(rng));
        CHECK(expected_params(with_logits(proto, logits)) >= base);
    }
}

TEST_CASE("generator checkpoint round-trip and integrity") {
    const auto proto = testing::reference_prototype();
    RequirementSpec req;
    req.min_accuracy = 0.9;
    req.max_params = 5000;
    auto gen = init_generator(proto, req, MetricConfig{2, 1, 0.5, 1e3, 1e6}, 1.25);
    std::vector<double> delta(192);
    for (std::size_t u = 0; u < delta.size(); ++u) delta[u] = 0.1 * std::sin(double(u));
    gen = apply_delta(gen, ParamDelta{delta});

    const auto doc = generator_to_json(gen, {7, 99});
    Provenance p;
    const auto back = generator_from_json(nlohmann::ordered_json::parse(doc.dump()), &p);
    CHECK(back == gen);
    CHECK(p.cycle == 7);
    CHECK(p.master_seed == 99);

    auto tampered = doc;
    tampered["retention_logits"][0] = 3.0;
    CHECK_THROWS_AS(generator_from_json(tampered), ConfigError);
    auto bad_version = doc;
    bad_version["version"] = 2;
    CHECK_THROWS_AS(generator_from_json(bad_version), ConfigError);
    auto extra = doc;
    extra["surprise"] = 1;
    CHECK_THROWS_AS(generator_from_json(extra), ConfigError);
}
