// SPDX-License-Identifier: Apache-2.0
#include "gensynth/inquisitor.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "gensynth/json_util.hpp"
#include "gensynth/rng.hpp"

namespace gensynth {

using json::ojson;

StimulusSet build_stimulus(const LabeledDataset& ds, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw DatasetError("stimulus set needs at least one sample");
    const auto train = ds.indices(Split::Train);
    if (n > train.size())
        throw DatasetError("stimulus size " + std::to_string(n) + " exceeds the train split (" +
                           std::to_string(train.size()) + ")");

    const auto k = static_cast<std::size_t>(ds.num_classes());
    std::vector<std::vector<std::size_t>> by_class(k);
    for (auto r : train) by_class[static_cast<std::size_t>(ds.labels()[r])].push_back(r);

    std::vector<std::size_t> take(k);
    std::vector<double> remainder(k);
    std::size_t assigned = 0;
    for (std::size_t c = 0; c < k; ++c) {
        double exact = static_cast<double>(n) * static_cast<double>(by_class[c].size()) / static_cast<double>(train.size());
        take[c] = std::min(by_class[c].size(), static_cast<std::size_t>(std::floor(exact)));
        remainder[c] = exact - std::floor(exact);
        assigned += take[c];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
    for (std::size_t i = 0; assigned < n; i = (i + 1) % k) {
        auto c = order[i];
        if (take[c] < by_class[c].size()) {
            ++take[c];
            ++assigned;
        }
    }

    StimulusSet x;
    x.sample_shape = ds.sample_shape();
    for (std::size_t c = 0; c < k; ++c) {
        auto members = by_class[c];
        std::mt19937_64 rng(derive_seed(seed, {tag("stimulus"), c}));
        std::shuffle(members.begin(), members.end(), rng);
        x.source_rows.insert(x.source_rows.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take[c]));
    }
    std::sort(x.source_rows.begin(), x.source_rows.end());
    x.count = x.source_rows.size();
    for (auto r : x.source_rows) {
        auto s = ds.sample(r);
        x.inputs.insert(x.inputs.end(), s.begin(), s.end());
    }
    return x;
}

namespace {

bool channel_preserving(OpKind kind) {
    return kind == OpKind::ReLU || kind == OpKind::MaxPool2D || kind == OpKind::GlobalAvgPool;
}

// Vertex whose output represents the units of prunable vertex i.
std::size_t response_vertex(const NetworkGraph& g, std::size_t i) {
    for (;;) {
        const auto& next = g.successors(i);
        if (next.size() != 1 || !channel_preserving(g.vertices()[next[0]].kind)) return i;
        i = next[0];
    }
}

ProbeSelection finish_selection(const NetworkGraph& g, const std::vector<bool>& chosen) {
    ProbeSelection sel;
    std::set<std::string> ids;
    for (std::size_t i = 0; i < chosen.size(); ++i)
        if (chosen[i]) {
            sel.vertex_ids.push_back(g.vertices()[i].id);
            ids.insert(g.vertices()[i].id);
        }
    for (const auto& e : g.edges())
        if (ids.count(e.first) || ids.count(e.second)) sel.edges.push_back(e);
    return sel;
}

}  // namespace

ProbeSelection select_all(const NetworkGraph& g) {
    return finish_selection(g, std::vector<bool>(g.vertices().size(), true));
}

ProbeSelection select_fraction(const NetworkGraph& g, double fraction, std::uint64_t seed) {
    if (!(fraction > 0 && fraction <= 1)) throw ConfigError("probe_fraction", "must be in (0, 1]");
    if (fraction >= 1) return select_all(g);
    const auto n = g.vertices().size();
    std::vector<bool> chosen(n, false);
    std::size_t fallback = NetworkGraph::npos;
    double fallback_key = 2.0;
    bool any = false;
    for (std::size_t i = 0; i < n; ++i) {
        if (g.prunable_units(i) == 0) continue;
        const double key = to_unit(derive_seed(seed, {tag(g.vertices()[i].id)}));
        if (key < fallback_key) {
            fallback_key = key;
            fallback = i;
        }
        if (key < fraction) {
            any = true;
            for (std::size_t v = i;; v = g.successors(v)[0]) {
                chosen[v] = true;
                if (v == response_vertex(g, i)) break;
            }
        }
    }
    if (!any && fallback != NetworkGraph::npos)
        for (std::size_t v = fallback;; v = g.successors(v)[0]) {
            chosen[v] = true;
            if (v == response_vertex(g, fallback)) break;
        }
    return finish_selection(g, chosen);
}

const VertexResponse* ResponseRecord::find(std::string_view id) const {
    for (const auto& v : vertices)
        if (v.vertex_id == id) return &v;
    return nullptr;
}

ResponseRecord probe(const NetworkGraph& g, const WeightStore& w, const StimulusSet& x, const ProbeSelection& sel,
                     std::size_t bins) {
    if (bins < 2) throw ConfigError("bins", "must be >= 2");
    std::vector<std::size_t> targets;
    for (const auto& id : sel.vertex_ids) {
        if (!g.contains(id)) throw GraphError(GraphError::Code::Schema, id, "probe selection names unknown vertex '" + id + "'");
        targets.push_back(g.index_of(id));
    }
    for (const auto& [src, dst] : sel.edges)
        if (!g.contains(src) || !g.contains(dst))
            throw GraphError(GraphError::Code::DanglingEdge, g.contains(src) ? dst : src,
                             "probe selection edge references an unknown vertex");

    ResponseRecord record;
    record.bins = bins;
    record.stimuli = x.count;
    if (targets.empty()) return record;

    const auto fr = forward(g, w, x.inputs, x.count);
    for (auto i : targets) {
        const auto& shape = g.shapes()[i];
        const auto units = static_cast<std::size_t>(shape[0]);
        const auto size = static_cast<std::size_t>(shape.size());
        const auto area = size / units;
        const auto& act = fr.activations[i];

        VertexResponse vr;
        vr.vertex_id = g.vertices()[i].id;
        vr.units.resize(units);
        std::vector<double> values(x.count);
        for (std::size_t u = 0; u < units; ++u) {
            for (std::size_t b = 0; b < x.count; ++b) {
                const double* p = act.data() + b * size + u * area;
                double sum = 0;
                for (std::size_t a = 0; a < area; ++a) sum += p[a];
                values[b] = sum / static_cast<double>(area);
            }
            auto& r = vr.units[u];
            auto [lo, hi] = std::minmax_element(values.begin(), values.end());
            r.min = *lo;
            r.max = *hi;
            double sum = 0, sq = 0;
            for (double v : values) {
                sum += v;
                sq += v * v;
            }
            r.mean = sum / static_cast<double>(x.count);
            r.rms = std::sqrt(sq / static_cast<double>(x.count));
            r.histogram.assign(bins, 0);
            const double range = r.max - r.min;
            for (double v : values) {
                std::size_t bin = 0;
                if (range > 0)
                    bin = std::min(bins - 1, static_cast<std::size_t>((v - r.min) / range * static_cast<double>(bins)));
                ++r.histogram[bin];
            }
        }
        record.vertices.push_back(std::move(vr));
    }
    return record;
}

double normalized_entropy(const std::vector<std::uint64_t>& histogram, std::size_t bins) {
    if (bins < 2) return 0.0;
    double total = 0;
    for (auto c : histogram) total += static_cast<double>(c);
    if (total <= 0) return 0.0;
    double h = 0;
    for (auto c : histogram)
        if (c > 0) {
            const double p = static_cast<double>(c) / total;
            h -= p * std::log(p);
        }
    return std::clamp(h / std::log(static_cast<double>(bins)), 0.0, 1.0);
}

double unit_saliency(const UnitResponse& r, std::size_t bins) { return normalized_entropy(r.histogram, bins) * r.rms; }

std::size_t SaliencyMap::observed() const {
    return static_cast<std::size_t>(std::count_if(scores.begin(), scores.end(), [](const auto& s) { return s.has_value(); }));
}

SaliencyMap saliency(const ResponseRecord& y, const SampledNetwork& sampled, std::size_t prototype_units) {
    SaliencyMap map;
    map.scores.assign(prototype_units, std::nullopt);
    const auto& g = sampled.graph;
    for (std::size_t i = 0; i < g.vertices().size(); ++i) {
        const auto units = static_cast<std::size_t>(g.prunable_units(i));
        if (units == 0) continue;
        const auto* vr = y.find(g.vertices()[response_vertex(g, i)].id);
        if (!vr) continue;
        const auto& origin = sampled.unit_origin.at(i);
        if (vr->units.size() != units || origin.size() != units)
            throw Error("response record does not match vertex '" + g.vertices()[i].id + "'");
        for (std::size_t u = 0; u < units; ++u) {
            const auto proto_unit = static_cast<std::size_t>(origin[u]);
            if (proto_unit >= prototype_units) throw Error("sampled unit maps outside the prototype");
            map.scores[proto_unit] = unit_saliency(vr->units[u], y.bins);
        }
    }
    return map;
}

void InquisitorConfig::validate() const {
    if (!(prune_step > 0) || !std::isfinite(prune_step)) throw ConfigError("prune_step", "must be > 0");
    if (!(restore_step > 0) || !std::isfinite(restore_step)) throw ConfigError("restore_step", "must be > 0");
    if (!(percentile > 0 && percentile < 1)) throw ConfigError("percentile", "must be in (0, 1)");
    if (bins < 2) throw ConfigError("bins", "must be >= 2");
    if (!(ema_decay >= 0 && ema_decay < 1)) throw ConfigError("ema_decay", "must be in [0, 1)");
}

InquisitorParams init_inquisitor(const InquisitorConfig& cfg, std::size_t prototype_units) {
    cfg.validate();
    InquisitorParams p;
    p.cfg = cfg;
    p.ema_saliency.assign(prototype_units, std::nullopt);
    return p;
}

InquisitorParams update_inquisitor(const InquisitorParams& params, const SaliencyMap& sal, bool indicator_bit) {
    if (sal.scores.size() != params.ema_saliency.size()) throw Error("saliency map is not aligned with the inquisitor");
    InquisitorParams next = params;
    const double decay = params.cfg.ema_decay;
    for (std::size_t u = 0; u < sal.scores.size(); ++u) {
        if (!sal.scores[u]) continue;
        auto& ema = next.ema_saliency[u];
        ema = ema ? decay * *ema + (1.0 - decay) * *sal.scores[u] : *sal.scores[u];
    }
    next.violation_streak = indicator_bit ? 0 : params.violation_streak + 1;
    return next;
}

double prune_scale(const InquisitorParams& params) {
    return std::ldexp(1.0, -static_cast<int>(std::min<std::uint64_t>(params.violation_streak, 1074)));
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw Error("quantile of an empty set");
    std::sort(values.begin(), values.end());
    const double pos = std::clamp(q, 0.0, 1.0) * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ParamDelta propose_delta(const InquisitorParams& params, const Generator& gen, const SaliencyMap& sal) {
    const auto n = gen.params().retention_logits.size();
    if (sal.scores.size() != n || params.ema_saliency.size() != n)
        throw Error("saliency map is not aligned with the generator");
    ParamDelta delta{std::vector<double>(n, 0.0)};

    std::vector<double> observed;
    for (std::size_t u = 0; u < n; ++u)
        if (sal.scores[u] && params.ema_saliency[u]) observed.push_back(*params.ema_saliency[u]);
    if (observed.empty()) return delta;

    const double t = quantile(observed, params.cfg.percentile);
    const double step = params.cfg.prune_step * prune_scale(params);
    const bool restore = params.violation_streak > 0;
    for (std::size_t u = 0; u < n; ++u) {
        if (!sal.scores[u] || !params.ema_saliency[u]) continue;
        const double s = *params.ema_saliency[u];
        double d = 0;
        if (s < t) d = -step * (t - s) / std::max(t, 1e-12);
        if (restore) d += params.cfg.restore_step;
        delta.values[u] = d;
    }
    return delta;
}

ojson inquisitor_config_to_json(const InquisitorConfig& cfg) {
    return ojson{{"prune_step", cfg.prune_step},
                 {"restore_step", cfg.restore_step},
                 {"percentile", cfg.percentile},
                 {"bins", cfg.bins},
                 {"ema_decay", cfg.ema_decay}};
}

InquisitorConfig inquisitor_config_from_json(const ojson& doc, const std::string& where) {
    json::reject_unknown(doc, {"prune_step", "restore_step", "percentile", "bins", "ema_decay"}, where);
    InquisitorConfig cfg;
    cfg.prune_step = json::number_or(doc, "prune_step", where, cfg.prune_step);
    cfg.restore_step = json::number_or(doc, "restore_step", where, cfg.restore_step);
    cfg.percentile = json::number_or(doc, "percentile", where, cfg.percentile);
    cfg.bins = static_cast<std::size_t>(json::unsigned_or(doc, "bins", where, cfg.bins));
    cfg.ema_decay = json::number_or(doc, "ema_decay", where, cfg.ema_decay);
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw json::rebase(where, e);
    }
    return cfg;
}

ojson inquisitor_to_json(const InquisitorParams& params) {
    ojson ema = ojson::array();
    for (const auto& e : params.ema_saliency) ema.push_back(e ? ojson(*e) : ojson(nullptr));
    return ojson{{"cfg", inquisitor_config_to_json(params.cfg)},
                 {"ema_saliency", std::move(ema)},
                 {"violation_streak", params.violation_streak}};
}

InquisitorParams inquisitor_from_json(const ojson& doc, const std::string& where) {
    json::reject_unknown(doc, {"cfg", "ema_saliency", "violation_streak"}, where);
    InquisitorParams p;
    p.cfg = inquisitor_config_from_json(json::field(doc, "cfg", where), json::join(where, "cfg"));
    const auto& ema = json::field(doc, "ema_saliency", where);
    if (!ema.is_array()) throw ConfigError(json::join(where, "ema_saliency"), "must be an array");
    for (const auto& e : ema) {
        if (e.is_null())
            p.ema_saliency.emplace_back(std::nullopt);
        else if (e.is_number())
            p.ema_saliency.emplace_back(e.get<double>());
        else
            throw ConfigError(json::join(where, "ema_saliency"), "entries must be numbers or null");
    }
    p.violation_streak = json::unsigned_integer(doc, "violation_streak", where);
    return p;
}

}  // namespace gensynth
