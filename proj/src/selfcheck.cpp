// SPDX-License-Identifier: Apache-2.0
#include "gensynth/selfcheck.hpp"

#include <cmath>
#include <sstream>

#include "gensynth/format.hpp"
#include "gensynth/metrics.hpp"
#include "gensynth/trainer.hpp"

namespace gensynth::selfcheck {

namespace {

std::int64_t pick(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

// Window start positions visited by a sliding kernel, counted one by one.
std::int64_t window_positions(std::int64_t extent, std::int64_t kernel, std::int64_t stride, std::int64_t padding) {
    std::int64_t n = 0;
    for (std::int64_t start = -padding; start + kernel <= extent + padding; start += stride) ++n;
    return n;
}

struct Walk {
    std::int64_t c = 0, h = 0, w = 0;
    bool image = false;
    std::int64_t features() const { return image ? c * h * w : c; }
};

template <typename Visit>
void walk(const NetworkGraph& g, Visit&& visit) {
    Walk t;
    const auto& in = g.input_shape();
    t.image = in.rank() == 3;
    t.c = in[0];
    if (t.image) {
        t.h = in[1];
        t.w = in[2];
    }
    // Chains only: follow successors from the input.
    std::size_t i = g.input_index();
    while (true) {
        const auto& v = g.vertices()[i];
        visit(v, t);
        switch (v.kind) {
        case OpKind::Dense:
            t = Walk{v.units, 0, 0, false};
            break;
        case OpKind::Conv2D:
            t = Walk{v.units, window_positions(t.h, v.kernel, v.stride, v.padding),
                     window_positions(t.w, v.kernel, v.stride, v.padding), true};
            break;
        case OpKind::MaxPool2D:
            t = Walk{t.c, window_positions(t.h, v.kernel, v.stride, 0), window_positions(t.w, v.kernel, v.stride, 0),
                     true};
            break;
        case OpKind::GlobalAvgPool:
            t = Walk{t.c, 0, 0, false};
            break;
        case OpKind::Flatten:
            t = Walk{t.features(), 0, 0, false};
            break;
        default:
            break;
        }
        if (g.successors(i).empty()) break;
        i = g.successors(i).front();
    }
}

}  // namespace

NetworkGraph random_chain(std::mt19937_64& rng) {
    std::vector<Vertex> vs;
    std::vector<Edge> es;
    std::string prev = "in";
    vs.push_back(Vertex::input(prev));
    int next_id = 0;
    auto add = [&](Vertex v) {
        v.id = "v" + std::to_string(next_id++);
        es.emplace_back(prev, v.id);
        prev = v.id;
        vs.push_back(std::move(v));
    };

    TensorShape input;
    if (pick(rng, 0, 1) == 0) {
        input = TensorShape::flat(pick(rng, 1, 8));
    } else {
        std::int64_t c = pick(rng, 1, 3), h = pick(rng, 3, 12), w = pick(rng, 3, 12);
        input = TensorShape::image(c, h, w);
        const auto stages = pick(rng, 1, 3);
        for (std::int64_t s = 0; s < stages; ++s) {
            const auto k = pick(rng, 1, 3), stride = pick(rng, 1, 2), pad = pick(rng, 0, 1);
            if (h + 2 * pad < k || w + 2 * pad < k) break;
            add(Vertex::conv2d("", pick(rng, 1, 6), k, stride, pad));
            h = window_positions(h, k, stride, pad);
            w = window_positions(w, k, stride, pad);
            if (pick(rng, 0, 1)) add(Vertex::relu(""));
            if (pick(rng, 0, 1) && h >= 2 && w >= 2) {
                const std::int64_t pk = 2, ps = pick(rng, 1, 2);
                add(Vertex::max_pool("", pk, ps));
                h = window_positions(h, pk, ps, 0);
                w = window_positions(w, pk, ps, 0);
            }
        }
        if (pick(rng, 0, 1)) add(Vertex::global_avg_pool(""));
        else add(Vertex::flatten(""));
    }
    const auto hidden = pick(rng, 0, 2);
    for (std::int64_t d = 0; d < hidden; ++d) {
        add(Vertex::dense("", pick(rng, 1, 16)));
        add(Vertex::relu(""));
    }
    add(Vertex::dense("", pick(rng, 2, 5)));
    add(Vertex::softmax(""));
    vs.push_back(Vertex::output("out"));
    es.emplace_back(prev, "out");
    return NetworkGraph(input, std::move(vs), std::move(es));
}

std::uint64_t enumerate_params(const NetworkGraph& g) {
    std::uint64_t n = 0;
    walk(g, [&](const Vertex& v, const Walk& t) {
        if (v.kind == OpKind::Dense) {
            for (std::int64_t o = 0; o < v.units; ++o) {
                for (std::int64_t i = 0; i < t.features(); ++i) ++n;
                ++n;
            }
        } else if (v.kind == OpKind::Conv2D) {
            for (std::int64_t o = 0; o < v.units; ++o) {
                for (std::int64_t i = 0; i < t.c; ++i)
                    for (std::int64_t k = 0; k < v.kernel * v.kernel; ++k) ++n;
                ++n;
            }
        }
    });
    return n;
}

std::uint64_t enumerate_macs(const NetworkGraph& g) {
    std::uint64_t n = 0;
    walk(g, [&](const Vertex& v, const Walk& t) {
        if (v.kind == OpKind::Dense) {
            for (std::int64_t o = 0; o < v.units; ++o)
                for (std::int64_t i = 0; i < t.features(); ++i) ++n;
        } else if (v.kind == OpKind::Conv2D) {
            for (std::int64_t y = -v.padding; y + v.kernel <= t.h + v.padding; y += v.stride)
                for (std::int64_t x = -v.padding; x + v.kernel <= t.w + v.padding; x += v.stride)
                    for (std::int64_t o = 0; o < v.units; ++o)
                        for (std::int64_t i = 0; i < t.c; ++i)
                            for (std::int64_t ky = 0; ky < v.kernel; ++ky)
                                for (std::int64_t kx = 0; kx < v.kernel; ++kx) ++n;
        }
    });
    return n;
}

NetworkGraph every_kind_network() {
    std::vector<Vertex> vs{Vertex::input("in"),          Vertex::conv2d("c1", 3, 3, 1, 1),
                           Vertex::relu("r1"),           Vertex::max_pool("p1", 2, 2),
                           Vertex::conv2d("c2", 4, 2, 1, 0), Vertex::global_avg_pool("g"),
                           Vertex::flatten("f"),         Vertex::dense("d1", 5),
                           Vertex::relu("r2"),           Vertex::dense("d2", 3),
                           Vertex::softmax("s"),         Vertex::output("out")};
    std::vector<Edge> es;
    for (std::size_t i = 0; i + 1 < vs.size(); ++i) es.emplace_back(vs[i].id, vs[i + 1].id);
    return NetworkGraph(TensorShape::image(2, 6, 6), std::move(vs), std::move(es));
}

OracleResult check_counters(std::size_t graphs, std::uint64_t seed) {
    OracleResult r{"counters", true, ""};
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k < graphs; ++k) {
        const auto g = random_chain(rng);
        const auto p = count_params(g), ep = enumerate_params(g);
        const auto m = count_macs(g), em = enumerate_macs(g);
        if (p != ep || m != em) {
            std::ostringstream os;
            os << "graph " << k << ": params " << p << " vs " << ep << ", macs " << m << " vs " << em;
            return {r.name, false, os.str()};
        }
    }
    r.detail = std::to_string(graphs) + " random graphs match";
    return r;
}

OracleResult check_gradients(std::uint64_t seed) {
    constexpr double kEpsilon = 1e-5;
    constexpr double kTolerance = 1e-4;
    const auto g = every_kind_network();
    const auto w = init_weights(g, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    constexpr std::size_t batch = 4;
    std::vector<double> x(batch * static_cast<std::size_t>(g.input_shape().size()));
    for (auto& v : x) v = normal(rng);
    std::vector<int> y(batch);
    for (auto& v : y) v = static_cast<int>(pick(rng, 0, 2));
    const auto report = grad_check(g, w, x, y, kEpsilon, seed);
    return {"gradients", report.max_relative_error < kTolerance && report.kinks == 0,
            "max relative error " + format_double(report.max_relative_error) + " over " +
                std::to_string(report.coordinates) + " coordinates, " + std::to_string(report.kinks) + " kinks"};
}

OracleResult check_netscore(std::size_t triples, std::uint64_t seed) {
    constexpr double kTolerance = 1e-9;
    const MetricConfig cfg;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> acc(0.01, 1.0);
    double worst = 0;
    for (std::size_t k = 0; k < triples; ++k) {
        const double a = acc(rng);
        const auto p = static_cast<std::uint64_t>(pick(rng, 1, 50'000'000));
        const auto m = static_cast<std::uint64_t>(pick(rng, 1, 5'000'000'000));
        const double direct = 20.0 * std::log10(std::pow(a * 100.0, cfg.kappa) /
                                                (std::pow(p / cfg.param_unit, cfg.beta) *
                                                 std::pow(m / cfg.mac_unit, cfg.gamma)));
        const double got = netscore(a, p, m, cfg);
        worst = std::max(worst, std::abs(got - direct) / std::max(std::abs(direct), 1e-300));
        const double density = information_density(a, p, cfg);
        const double direct_density = a * 100.0 / (p / cfg.param_unit);
        worst = std::max(worst, std::abs(density - direct_density) / direct_density);
    }
    const double unit = netscore(1.0, 1'000'000, 1'000'000, cfg);
    const bool ok = worst < kTolerance && unit == 80.0;
    return {"netscore", ok, "max relative error " + format_double(worst) + ", unit case " + format_double(unit)};
}

std::vector<OracleResult> run_all() {
    return {check_counters(64, 0x5eed), check_gradients(7), check_netscore(100, 0xace)};
}

}  // namespace gensynth::selfcheck
