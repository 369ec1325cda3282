// SPDX-License-Identifier: Apache-2.0
//
// The generator maps a 64-bit seed to a concrete network derived from a
// prototype. Its parameters are one retention logit per prunable unit of the
// prototype; sampling keeps unit u when sigmoid(logit_u) exceeds a
// counter-based uniform draw keyed by (seed, u).
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gensynth/metrics.hpp"
#include "gensynth/netgraph.hpp"

namespace gensynth {

struct Seed {
    std::uint64_t value = 0;
    friend bool operator==(const Seed&, const Seed&) = default;
};

struct GeneratorParams {
    /// Canonical unit order: vertices in topological order, then unit index.
    std::vector<double> retention_logits;
    /// SHA-256 of the prototype's canonical document.
    std::string prototype_digest;

    friend bool operator==(const GeneratorParams&, const GeneratorParams&) = default;
};

/// Per-unit logit increments aligned with GeneratorParams::retention_logits.
struct ParamDelta {
    std::vector<double> values;
};

inline constexpr double kLogitClamp = 50.0;

class Generator {
public:
    /// Throws ConfigError when params are misaligned or bound to another prototype.
    Generator(NetworkGraph prototype, GeneratorParams params, MetricConfig metric_cfg, RequirementSpec req);

    const NetworkGraph& prototype() const noexcept { return prototype_; }
    const GeneratorParams& params() const noexcept { return params_; }
    const MetricConfig& metric_config() const noexcept { return metric_cfg_; }
    const RequirementSpec& requirement() const noexcept { return req_; }

    friend bool operator==(const Generator&, const Generator&) = default;

private:
    NetworkGraph prototype_;
    GeneratorParams params_;
    MetricConfig metric_cfg_;
    RequirementSpec req_;
};

std::string prototype_digest(const NetworkGraph& prototype);

Generator init_generator(const NetworkGraph& prototype, const RequirementSpec& req, const MetricConfig& metric_cfg,
                         double init_logit = 2.0);

/// A sampled network together with the prototype units it kept.
struct SampledNetwork {
    NetworkGraph graph;
    RetentionMask mask;
    /// For each vertex of `graph`, the prototype unit index of each of its
    /// prunable units (empty for non-prunable vertices).
    std::vector<std::vector<std::int64_t>> unit_origin;
};

SampledNetwork sample_with_mask(const Generator& gen, Seed s);
NetworkGraph sample(const Generator& gen, Seed s);

/// logits' = clamp(logits + delta, -50, +50). Throws Error on a length mismatch.
Generator apply_delta(const Generator& gen, const ParamDelta& delta);

/// Expected parameter count when each unit is kept independently with
/// probability sigmoid(logit), using expected widths layer by layer (the
/// one-unit floor is ignored).
double expected_params(const Generator& gen);

/// Smallest and largest keep-probability over all prunable units.
std::pair<double, double> keep_probability_range(const Generator& gen);

double sigmoid(double x);

// Checkpoint document: version, prototype, retention_logits, prototype_digest,
// metric_cfg, req, provenance {cycle, master_seed}.
struct Provenance {
    std::uint64_t cycle = 0;
    std::uint64_t master_seed = 0;
};

nlohmann::ordered_json generator_to_json(const Generator& gen, const Provenance& provenance);
/// Throws ConfigError on version or digest mismatch or a malformed document.
Generator generator_from_json(const nlohmann::ordered_json& doc, Provenance* provenance = nullptr);

nlohmann::ordered_json metric_config_to_json(const MetricConfig& cfg);
MetricConfig metric_config_from_json(const nlohmann::ordered_json& doc, const std::string& where);
nlohmann::ordered_json requirement_to_json(const RequirementSpec& req);
RequirementSpec requirement_from_json(const nlohmann::ordered_json& doc, const std::string& where);

}  // namespace gensynth
