// SPDX-License-Identifier: Apache-2.0
#include "gensynth/generator.hpp"

#include <algorithm>
#include <cmath>

#include "gensynth/digest.hpp"
#include "gensynth/json_util.hpp"
#include "gensynth/rng.hpp"

namespace gensynth {

using json::ojson;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

std::string prototype_digest(const NetworkGraph& prototype) { return sha256_hex(serialize(prototype)); }

Generator::Generator(NetworkGraph prototype, GeneratorParams params, MetricConfig metric_cfg, RequirementSpec req)
    : prototype_(std::move(prototype)),
      params_(std::move(params)),
      metric_cfg_(metric_cfg),
      req_(std::move(req)) {
    if (static_cast<std::int64_t>(params_.retention_logits.size()) != prototype_.total_prunable_units())
        throw ConfigError("retention_logits", "expected " + std::to_string(prototype_.total_prunable_units()) +
                                                  " entries, got " + std::to_string(params_.retention_logits.size()));
    for (double x : params_.retention_logits)
        if (!std::isfinite(x)) throw ConfigError("retention_logits", "entries must be finite");
    if (params_.prototype_digest != prototype_digest(prototype_))
        throw ConfigError("prototype_digest", "generator parameters are bound to a different prototype");
}

Generator init_generator(const NetworkGraph& prototype, const RequirementSpec& req, const MetricConfig& metric_cfg,
                         double init_logit) {
    req.validate();
    metric_cfg.validate();
    if (!std::isfinite(init_logit)) throw ConfigError("init_logit", "must be finite");
    const double logit = std::clamp(init_logit, -kLogitClamp, kLogitClamp);
    GeneratorParams params{std::vector<double>(static_cast<std::size_t>(prototype.total_prunable_units()), logit),
                           prototype_digest(prototype)};
    return Generator(prototype, std::move(params), metric_cfg, req);
}

SampledNetwork sample_with_mask(const Generator& gen, Seed s) {
    const auto& proto = gen.prototype();
    const auto& logits = gen.params().retention_logits;
    RetentionMask mask(logits.size(), false);
    std::vector<std::vector<std::int64_t>> origin(proto.vertices().size());
    for (std::size_t i = 0; i < proto.vertices().size(); ++i) {
        const auto units = proto.prunable_units(i);
        if (units == 0) continue;
        const auto offset = static_cast<std::size_t>(proto.unit_offset(i));
        std::size_t best = offset;
        for (std::size_t u = offset; u < offset + static_cast<std::size_t>(units); ++u) {
            mask[u] = sigmoid(logits[u]) > stream_uniform(s.value, u);
            if (mask[u]) origin[i].push_back(static_cast<std::int64_t>(u));
            if (logits[u] > logits[best]) best = u;
        }
        if (origin[i].empty()) {
            mask[best] = true;
            origin[i].push_back(static_cast<std::int64_t>(best));
        }
    }
    NetworkGraph graph = apply_retention(proto, mask);
    return {std::move(graph), std::move(mask), std::move(origin)};
}

NetworkGraph sample(const Generator& gen, Seed s) { return sample_with_mask(gen, s).graph; }

Generator apply_delta(const Generator& gen, const ParamDelta& delta) {
    const auto& logits = gen.params().retention_logits;
    if (delta.values.size() != logits.size())
        throw Error("parameter delta has " + std::to_string(delta.values.size()) + " entries, generator has " +
                    std::to_string(logits.size()));
    GeneratorParams next = gen.params();
    for (std::size_t u = 0; u < logits.size(); ++u) {
        if (!std::isfinite(delta.values[u])) throw Error("parameter delta contains a non-finite entry");
        next.retention_logits[u] = std::clamp(logits[u] + delta.values[u], -kLogitClamp, kLogitClamp);
    }
    return Generator(gen.prototype(), std::move(next), gen.metric_config(), gen.requirement());
}

double expected_params(const Generator& gen) {
    const auto& proto = gen.prototype();
    const auto& logits = gen.params().retention_logits;
    const auto& vs = proto.vertices();
    // Expected leading extent (features, or channels of an image tensor) per vertex.
    std::vector<double> width(vs.size(), 0.0);
    double total = 0;
    for (std::size_t i = 0; i < vs.size(); ++i) {
        const auto& v = vs[i];
        const double in = v.kind == OpKind::Input ? static_cast<double>(proto.input_shape()[0]) : width[proto.predecessor(i)];
        switch (v.kind) {
        case OpKind::Dense:
        case OpKind::Conv2D: {
            double out = static_cast<double>(v.units);
            if (auto units = proto.prunable_units(i); units > 0) {
                out = 0;
                const auto offset = static_cast<std::size_t>(proto.unit_offset(i));
                for (std::size_t u = offset; u < offset + static_cast<std::size_t>(units); ++u) out += sigmoid(logits[u]);
            }
            const double k2 = v.kind == OpKind::Conv2D ? static_cast<double>(v.kernel * v.kernel) : 1.0;
            total += in * k2 * out + out;
            width[i] = out;
            break;
        }
        case OpKind::Flatten: {
            const auto& src = proto.input_shape_of(i);
            width[i] = src.rank() == 3 ? in * static_cast<double>(src[1] * src[2]) : in;
            break;
        }
        default:
            width[i] = in;
            break;
        }
    }
    return total;
}

std::pair<double, double> keep_probability_range(const Generator& gen) {
    const auto& logits = gen.params().retention_logits;
    if (logits.empty()) return {1.0, 1.0};
    auto [lo, hi] = std::minmax_element(logits.begin(), logits.end());
    return {sigmoid(*lo), sigmoid(*hi)};
}

// ---------------------------------------------------------------------------
// Documents

ojson metric_config_to_json(const MetricConfig& cfg) {
    return ojson{{"kappa", cfg.kappa},
                 {"beta", cfg.beta},
                 {"gamma", cfg.gamma},
                 {"param_unit", cfg.param_unit},
                 {"mac_unit", cfg.mac_unit}};
}

MetricConfig metric_config_from_json(const ojson& doc, const std::string& where) {
    json::reject_unknown(doc, {"kappa", "beta", "gamma", "param_unit", "mac_unit"}, where);
    MetricConfig cfg;
    cfg.kappa = json::number_or(doc, "kappa", where, cfg.kappa);
    cfg.beta = json::number_or(doc, "beta", where, cfg.beta);
    cfg.gamma = json::number_or(doc, "gamma", where, cfg.gamma);
    cfg.param_unit = json::number_or(doc, "param_unit", where, cfg.param_unit);
    cfg.mac_unit = json::number_or(doc, "mac_unit", where, cfg.mac_unit);
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw json::rebase(where, e);
    }
    return cfg;
}

ojson requirement_to_json(const RequirementSpec& req) {
    ojson doc{{"min_accuracy", req.min_accuracy}, {"eval_split", std::string(split_name(req.eval_split))}};
    doc["max_params"] = req.max_params ? ojson(*req.max_params) : ojson(nullptr);
    doc["max_macs"] = req.max_macs ? ojson(*req.max_macs) : ojson(nullptr);
    return doc;
}

RequirementSpec requirement_from_json(const ojson& doc, const std::string& where) {
    json::reject_unknown(doc, {"min_accuracy", "eval_split", "max_params", "max_macs"}, where);
    RequirementSpec req;
    req.min_accuracy = json::number_or(doc, "min_accuracy", where, req.min_accuracy);
    if (doc.contains("eval_split")) {
        auto name = json::string(doc, "eval_split", where);
        if (name != "val" && name != "test") throw ConfigError(json::join(where, "eval_split"), "must be val or test");
        req.eval_split = split_from_name(name);
    }
    for (const char* key : {"max_params", "max_macs"}) {
        if (!doc.contains(key) || doc[key].is_null()) continue;
        auto v = json::unsigned_integer(doc, key, where);
        if (v == 0) throw ConfigError(json::join(where, key), "must be positive");
        (std::string_view(key) == "max_params" ? req.max_params : req.max_macs) = v;
    }
    try {
        req.validate();
    } catch (const ConfigError& e) {
        throw json::rebase(where, e);
    }
    return req;
}

namespace {

ojson generator_body(const Generator& gen, const Provenance& provenance) {
    ojson doc;
    doc["version"] = 1;
    doc["prototype"] = ojson::parse(serialize(gen.prototype()));
    doc["prototype_digest"] = gen.params().prototype_digest;
    doc["retention_logits"] = gen.params().retention_logits;
    doc["metric_cfg"] = metric_config_to_json(gen.metric_config());
    doc["req"] = requirement_to_json(gen.requirement());
    doc["provenance"] = ojson{{"cycle", provenance.cycle}, {"master_seed", provenance.master_seed}};
    return doc;
}

}  // namespace

ojson generator_to_json(const Generator& gen, const Provenance& provenance) {
    ojson doc = generator_body(gen, provenance);
    doc["digest"] = sha256_hex(doc.dump());
    return doc;
}

Generator generator_from_json(const ojson& doc, Provenance* provenance) {
    const std::string where = "generator";
    json::reject_unknown(doc, {"version", "prototype", "prototype_digest", "retention_logits", "metric_cfg", "req",
                               "provenance", "digest"},
                         where);
    if (json::integer(doc, "version", where) != 1) throw ConfigError("generator.version", "unsupported version");

    NetworkGraph prototype = [&] {
        try {
            return parse_network(json::field(doc, "prototype", where).dump());
        } catch (const GraphError& e) {
            throw ConfigError("generator.prototype", e.what());
        }
    }();
    GeneratorParams params;
    params.prototype_digest = json::string(doc, "prototype_digest", where);
    const auto& logits = json::field(doc, "retention_logits", where);
    if (!logits.is_array()) throw ConfigError("generator.retention_logits", "must be an array");
    for (const auto& x : logits) {
        if (!x.is_number()) throw ConfigError("generator.retention_logits", "entries must be numbers");
        params.retention_logits.push_back(x.get<double>());
    }
    auto metric = metric_config_from_json(json::field(doc, "metric_cfg", where), "generator.metric_cfg");
    auto req = requirement_from_json(json::field(doc, "req", where), "generator.req");
    const auto& prov = json::field(doc, "provenance", where);
    json::reject_unknown(prov, {"cycle", "master_seed"}, "generator.provenance");
    Provenance p{json::unsigned_integer(prov, "cycle", "generator.provenance"),
                 json::unsigned_integer(prov, "master_seed", "generator.provenance")};

    Generator gen(std::move(prototype), std::move(params), metric, req);
    const std::string stored = json::string(doc, "digest", where);
    if (stored != sha256_hex(generator_body(gen, p).dump()))
        throw ConfigError("generator.digest", "checkpoint content does not match its digest");
    if (provenance) *provenance = p;
    return gen;
}

}  // namespace gensynth
