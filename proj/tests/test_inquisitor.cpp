// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include <nlohmann/json.hpp>

#include "gensynth/inquisitor.hpp"
#include "gensynth/selfcheck.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace gensynth;

namespace {

LabeledDataset small_blobs() { return split(synth_blobs(3, 20, 0.2, 1), {0.5, 0.5, 0.0}, 2); }

SaliencyMap map_of(std::vector<std::optional<double>> s) { return SaliencyMap{std::move(s)}; }

Generator flat_generator(std::size_t units_hidden) {
    const auto proto = testing::mlp(2, {static_cast<std::int64_t>(units_hidden)}, 2);
    return init_generator(proto, RequirementSpec{}, MetricConfig{});
}

}  // namespace

TEST_CASE("build_stimulus") {
    const auto ds = small_blobs();
    const auto train = ds.indices(Split::Train);
    SUBCASE("whole split in canonical order") {
        const auto x = build_stimulus(ds, train.size(), 4);
        CHECK(x.source_rows == train);
        CHECK(x.count == train.size());
        CHECK(x.inputs.size() == train.size() * 2);
    }
    SUBCASE("deterministic and stratified") {
        const auto a = build_stimulus(ds, 9, 4), b = build_stimulus(ds, 9, 4);
        CHECK(a.source_rows == b.source_rows);
        CHECK(a.inputs == b.inputs);
        CHECK(std::is_sorted(a.source_rows.begin(), a.source_rows.end()));
        for (int c = 0; c < 3; ++c)
            CHECK(std::count_if(a.source_rows.begin(), a.source_rows.end(), [&](auto r) { return ds.labels()[r] == c; }) ==
                  3);
        for (auto r : a.source_rows) CHECK(ds.assignment()[r] == Split::Train);
    }
    SUBCASE("size limits") {
        CHECK_THROWS_AS(build_stimulus(ds, 0, 1), DatasetError);
        CHECK_THROWS_AS(build_stimulus(ds, train.size() + 1, 1), DatasetError);
    }
}

TEST_CASE("probe") {
    const auto ds = small_blobs();
    const auto g = testing::mlp(2, {2}, 2);
    auto w = init_weights(g, 3);
    const auto x = build_stimulus(ds, 20, 1);
    SUBCASE("empty selection yields an empty record") {
        CHECK(probe(g, w, x, ProbeSelection{}, 16).empty());
    }
    SUBCASE("unknown vertex id is rejected") {
        CHECK_THROWS_AS(probe(g, w, x, ProbeSelection{{"nope"}, {}}, 16), GraphError);
    }
    SUBCASE("dead ReLU unit has mean 0 and RMS 0; constant unit fills one bin") {
        auto& fc = w.layers[g.index_of("fc1")];
        fc.weight[0] = fc.weight[2] = 0.0;  // unit 0 ignores both inputs
        fc.bias[0] = -1.0;
        const auto y = probe(g, w, x, ProbeSelection{{"relu1"}, {}}, 16);
        const auto& unit = y.find("relu1")->units[0];
        // Reference pass per stimulus.
        for (std::size_t n = 0; n < x.count; ++n) {
            const auto ref = oracle::forward(g, w, {x.inputs[2 * n], x.inputs[2 * n + 1]});
            CHECK(ref.activations.at("relu1")[0] == 0.0);
        }
        CHECK(unit.mean == 0.0);
        CHECK(unit.rms == 0.0);
        CHECK(unit.histogram[0] == x.count);
        CHECK(std::count(unit.histogram.begin(), unit.histogram.end(), 0u) == 15);
        CHECK(unit_saliency(unit, 16) == 0.0);
    }
    SUBCASE("statistics match the reference pass") {
        const auto y = probe(g, w, x, select_all(g), 8);
        const auto& unit = y.find("fc1")->units[1];
        double sum = 0, sq = 0;
        for (std::size_t n = 0; n < x.count; ++n) {
            const double a = oracle::forward(g, w, {x.inputs[2 * n], x.inputs[2 * n + 1]}).activations.at("fc1")[1];
            sum += a;
            sq += a * a;
        }
        CHECK(unit.mean == doctest::Approx(sum / x.count).epsilon(1e-12));
        CHECK(unit.rms == doctest::Approx(std::sqrt(sq / x.count)).epsilon(1e-12));
    }
}

TEST_CASE("full probe gives every unit histogram mass n") {
    const auto g = selfcheck::every_kind_network();
    const auto w = init_weights(g, 1);
    StimulusSet x{g.input_shape(), 11, {}, {}};
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d;
    x.inputs.resize(11 * 72);
    for (auto& v : x.inputs) v = d(rng);
    const auto y = probe(g, w, x, select_all(g), 16);
    CHECK(y.vertices.size() == g.vertices().size());
    for (const auto& v : y.vertices)
        for (const auto& u : v.units) CHECK(std::accumulate(u.histogram.begin(), u.histogram.end(), 0ull) == 11);
}

TEST_CASE("normalized entropy and saliency") {
    UnitResponse uniform;
    uniform.rms = 1.0;
    uniform.histogram.assign(16, 5);
    CHECK(unit_saliency(uniform, 16) == doctest::Approx(1.0).epsilon(1e-15));

    UnitResponse two;
    two.rms = 2.0;
    two.histogram.assign(16, 0);
    two.histogram[3] = two.histogram[9] = 7;
    const double hand = oracle::entropy_bits(two.histogram) / std::log2(16.0);
    CHECK(hand == doctest::Approx(0.25));
    CHECK(unit_saliency(two, 16) == doctest::Approx(0.5).epsilon(1e-15));

    UnitResponse constant;
    constant.rms = 3.0;
    constant.histogram.assign(16, 0);
    constant.histogram[0] = 40;
    CHECK(unit_saliency(constant, 16) == 0.0);

    // Invariant to rescaling of the counts.
    std::mt19937_64 rng(5);
    for (int t = 0; t < 30; ++t) {
        std::vector<std::uint64_t> h(16);
        for (auto& c : h) c = rng() % 9;
        h[0] += 1;
        auto scaled = h;
        for (auto& c : scaled) c *= 7;
        CHECK(normalized_entropy(h, 16) == doctest::Approx(normalized_entropy(scaled, 16)).epsilon(1e-12));
        CHECK(normalized_entropy(h, 16) == doctest::Approx(oracle::entropy_bits(h) / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("saliency maps sampled units back to prototype indices") {
    const auto proto = testing::mlp(2, {4}, 2);
    auto gen = init_generator(proto, RequirementSpec{}, MetricConfig{});
    gen = apply_delta(gen, ParamDelta{{50, -50, 50, -50}});
    const auto sampled = sample_with_mask(gen, Seed{1});
    REQUIRE(sampled.unit_origin[sampled.graph.index_of("fc1")] == std::vector<std::int64_t>{0, 2});
    const auto w = init_weights(sampled.graph, 2);
    const auto ds = small_blobs();
    const auto y = probe(sampled.graph, w, build_stimulus(ds, 12, 1), select_all(sampled.graph), 16);
    const auto map = saliency(y, sampled, 4);
    CHECK(map.observed() == 2);
    CHECK(map.scores[0].has_value());
    CHECK(map.scores[2].has_value());
    CHECK_FALSE(map.scores[1].has_value());
    CHECK(*map.scores[0] == unit_saliency(y.find("relu1")->units[0], 16));
    CHECK(*map.scores[2] == unit_saliency(y.find("relu1")->units[1], 16));
    for (auto& s : map.scores)
        if (s) CHECK(*s >= 0.0);
}

TEST_CASE("select_fraction") {
    const auto g = testing::reference_prototype();
    CHECK(select_fraction(g, 1.0, 3).vertex_ids == select_all(g).vertex_ids);
    const auto a = select_fraction(g, 0.01, 3);
    CHECK(!a.vertex_ids.empty());
    CHECK(a.vertex_ids.size() == 2);  // one prunable vertex plus its ReLU
    CHECK(select_fraction(g, 0.5, 11).vertex_ids == select_fraction(g, 0.5, 11).vertex_ids);
    for (const auto& [s, d] : a.edges)
        CHECK((std::find(a.vertex_ids.begin(), a.vertex_ids.end(), s) != a.vertex_ids.end() ||
               std::find(a.vertex_ids.begin(), a.vertex_ids.end(), d) != a.vertex_ids.end()));
    CHECK_THROWS_AS(select_fraction(g, 0.0, 1), ConfigError);
}

TEST_CASE("update_inquisitor") {
    InquisitorConfig cfg;
    auto p = init_inquisitor(cfg, 3);
    SUBCASE("first observation seeds the average, later ones blend") {
        p = update_inquisitor(p, map_of({1.0, std::nullopt, 2.0}), true);
        CHECK(p.ema_saliency[0] == 1.0);
        CHECK_FALSE(p.ema_saliency[1].has_value());
        p = update_inquisitor(p, map_of({3.0, 5.0, std::nullopt}), true);
        CHECK(*p.ema_saliency[0] == doctest::Approx(0.5 * 1.0 + 0.5 * 3.0));
        CHECK(*p.ema_saliency[1] == 5.0);
        CHECK(*p.ema_saliency[2] == 2.0);
    }
    SUBCASE("decay 0 tracks the current saliency exactly") {
        cfg.ema_decay = 0.0;
        auto q = init_inquisitor(cfg, 3);
        q = update_inquisitor(q, map_of({0.3, 0.4, 0.5}), true);
        q = update_inquisitor(q, map_of({0.7, 0.1, 0.9}), false);
        CHECK(q.ema_saliency == std::vector<std::optional<double>>{0.7, 0.1, 0.9});
    }
    SUBCASE("streak grows on violations and resets on satisfaction") {
        for (int i = 0; i < 3; ++i) p = update_inquisitor(p, map_of({{}, {}, {}}), false);
        CHECK(p.violation_streak == 3);
        CHECK(prune_scale(p) == 0.125);
        p = update_inquisitor(p, map_of({{}, {}, {}}), true);
        CHECK(p.violation_streak == 0);
        CHECK(prune_scale(p) == 1.0);
    }
}

TEST_CASE("propose_delta") {
    const auto gen = flat_generator(4);
    InquisitorConfig cfg;
    auto p = init_inquisitor(cfg, 4);
    SUBCASE("no pressure when every unit sits at the threshold") {
        p = update_inquisitor(p, map_of({1.0, 1.0, 1.0, 1.0}), true);
        CHECK(propose_delta(p, gen, map_of({1.0, 1.0, 1.0, 1.0})).values == std::vector<double>(4, 0.0));
    }
    SUBCASE("zero saliency under a positive threshold gets the full step") {
        p = update_inquisitor(p, map_of({0.0, 1.0, 2.0, 3.0}), true);
        const auto d = propose_delta(p, gen, map_of({0.0, 1.0, 2.0, 3.0}));
        // 0.3-quantile of {0,1,2,3} is 0.9.
        CHECK(quantile({0, 1, 2, 3}, 0.3) == doctest::Approx(0.9));
        CHECK(d.values[0] == doctest::Approx(-0.5));
        CHECK(d.values[1] == 0.0);
        CHECK(d.values[3] == 0.0);
    }
    SUBCASE("after a violation units above the threshold are restored") {
        p = update_inquisitor(p, map_of({0.0, 1.0, 2.0, 3.0}), false);
        const auto d = propose_delta(p, gen, map_of({0.0, 1.0, 2.0, 3.0}));
        CHECK(d.values[3] == doctest::Approx(0.3));
        CHECK(d.values[0] == doctest::Approx(-0.25 + 0.3));
    }
    SUBCASE("two violations quarter the pruning step") {
        p = update_inquisitor(p, map_of({0.0, 1.0, 2.0, 3.0}), false);
        p = update_inquisitor(p, map_of({0.0, 1.0, 2.0, 3.0}), false);
        const auto d = propose_delta(p, gen, map_of({0.0, 1.0, 2.0, 3.0}));
        CHECK(d.values[0] == doctest::Approx(-0.125 + 0.3));
    }
    SUBCASE("unobserved units are untouched") {
        p = update_inquisitor(p, map_of({0.0, 1.0, std::nullopt, 3.0}), false);
        CHECK(propose_delta(p, gen, map_of({0.0, 1.0, std::nullopt, 3.0})).values[2] == 0.0);
    }
    SUBCASE("misaligned map") {
        CHECK_THROWS_AS(propose_delta(p, gen, map_of({1.0})), Error);
    }
}

TEST_CASE("propose_delta is bounded and never restores below-threshold units under satisfaction") {
    const auto gen = flat_generator(12);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> u(0, 2);
    for (int t = 0; t < 200; ++t) {
        InquisitorConfig cfg{u(rng) + 0.01, u(rng) + 0.01, 0.05 + 0.9 * u(rng) / 2, 16, u(rng) / 2.1};
        auto p = init_inquisitor(cfg, 12);
        bool last = true;
        for (int step = 0; step < 4; ++step) {
            std::vector<std::optional<double>> s(12);
            for (auto& v : s)
                if (rng() % 4) v = u(rng) * (rng() % 3 ? 1.0 : 0.0);
            last = rng() % 2;
            p = update_inquisitor(p, map_of(s), last);
            const auto d = propose_delta(p, gen, map_of(s));
            for (double v : d.values) CHECK(std::abs(v) <= cfg.prune_step + cfg.restore_step + 1e-12);
            if (last)
                for (double v : d.values) CHECK(v <= 0.0);
        }
    }
}

TEST_CASE("inquisitor state round-trips through JSON") {
    InquisitorConfig cfg{0.4, 0.2, 0.25, 8, 0.3};
    auto p = init_inquisitor(cfg, 3);
    p = update_inquisitor(p, map_of({0.125, std::nullopt, 1.0 / 3.0}), false);
    const auto doc = nlohmann::ordered_json::parse(inquisitor_to_json(p).dump());
    CHECK(inquisitor_from_json(doc, "inquisitor") == p);
    try {
        inquisitor_config_from_json(nlohmann::ordered_json{{"bins", 1}}, "inquisitor");
        FAIL("accepted");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "inquisitor.bins");
    }
}
