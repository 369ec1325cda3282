// SPDX-License-Identifier: Apache-2.0
//
// The inquisitor probes a generated network with stimulus inputs, summarizes
// each unit's responses as a histogram, scores units by normalized response
// entropy times RMS magnitude, and turns smoothed scores into retention-logit
// changes for the generator.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gensynth/dataset.hpp"
#include "gensynth/generator.hpp"
#include "gensynth/metrics.hpp"
#include "gensynth/netgraph.hpp"
#include "gensynth/trainer.hpp"

namespace gensynth {

struct StimulusSet {
    TensorShape sample_shape;
    std::size_t count = 0;
    std::vector<double> inputs;          // count samples, row-major
    std::vector<std::size_t> source_rows;  // dataset indices, ascending
};

/// Class-stratified deterministic draw of n train-split samples.
/// Throws DatasetError when n is 0 or exceeds the train split.
StimulusSet build_stimulus(const LabeledDataset& ds, std::size_t n, std::uint64_t seed);

struct ProbeSelection {
    std::vector<std::string> vertex_ids;
    std::vector<Edge> edges;
};

/// Every vertex and edge of g.
ProbeSelection select_all(const NetworkGraph& g);

/// Keeps a deterministic fraction of the prunable vertices (by hash of id and
/// seed, at least one), each with the channel-preserving vertices that follow it
/// (ReLU, MaxPool2D, GlobalAvgPool). Edges are those incident to selected vertices.
ProbeSelection select_fraction(const NetworkGraph& g, double fraction, std::uint64_t seed);

struct UnitResponse {
    double mean = 0;
    double rms = 0;
    double min = 0;
    double max = 0;
    std::vector<std::uint64_t> histogram;
};

struct VertexResponse {
    std::string vertex_id;
    std::vector<UnitResponse> units;
};

struct ResponseRecord {
    std::size_t bins = 0;
    std::size_t stimuli = 0;
    std::vector<VertexResponse> vertices;  // in selection order

    const VertexResponse* find(std::string_view id) const;
    bool empty() const noexcept { return vertices.empty(); }
};

/// One forward pass over X. A unit's per-stimulus response is its activation
/// (spatially averaged for image tensors). Histograms span [min, max] per unit
/// with `bins` equal-width bins; a constant unit fills bin 0.
/// Throws GraphError for an id not in g.
ResponseRecord probe(const NetworkGraph& g, const WeightStore& w, const StimulusSet& x, const ProbeSelection& sel,
                     std::size_t bins);

/// Shannon entropy of the histogram divided by log(bins), so in [0, 1].
double normalized_entropy(const std::vector<std::uint64_t>& histogram, std::size_t bins);
/// normalized_entropy * rms.
double unit_saliency(const UnitResponse& r, std::size_t bins);

/// Per prototype unit; units the probe did not observe are absent.
struct SaliencyMap {
    std::vector<std::optional<double>> scores;

    std::size_t observed() const;
};

/// Maps the record back onto prototype unit indices. A prunable vertex is
/// scored at the last vertex of its channel-preserving chain; its units are
/// observed when that vertex appears in the record.
SaliencyMap saliency(const ResponseRecord& y, const SampledNetwork& sampled, std::size_t prototype_units);

struct InquisitorConfig {
    double prune_step = 0.5;
    double restore_step = 0.3;
    double percentile = 0.3;
    std::size_t bins = 16;
    double ema_decay = 0.5;

    void validate() const;
    friend bool operator==(const InquisitorConfig&, const InquisitorConfig&) = default;
};

struct InquisitorParams {
    InquisitorConfig cfg;
    /// Running per-unit saliency; absent until a unit is first observed.
    std::vector<std::optional<double>> ema_saliency;
    std::uint64_t violation_streak = 0;

    friend bool operator==(const InquisitorParams&, const InquisitorParams&) = default;
};

InquisitorParams init_inquisitor(const InquisitorConfig& cfg, std::size_t prototype_units);

/// Folds the observed saliency into the running average and tracks the
/// requirement outcome: a violation extends the streak, satisfaction resets it.
InquisitorParams update_inquisitor(const InquisitorParams& params, const SaliencyMap& sal, bool indicator_bit);

/// Multiplier on the pruning step: 0.5 per consecutive violation.
double prune_scale(const InquisitorParams& params);

/// Let t be the percentile of the observed units' running saliency. An observed
/// unit with running saliency s < t receives -step * (t - s) / max(t, 1e-12),
/// step = prune_step * prune_scale; after a violation every observed unit also
/// receives +restore_step. Unobserved units receive 0.
ParamDelta propose_delta(const InquisitorParams& params, const Generator& gen, const SaliencyMap& sal);

/// Linear-interpolation quantile of `values` (modified copy), q in [0, 1].
double quantile(std::vector<double> values, double q);

nlohmann::ordered_json inquisitor_config_to_json(const InquisitorConfig& cfg);
InquisitorConfig inquisitor_config_from_json(const nlohmann::ordered_json& doc, const std::string& where);
nlohmann::ordered_json inquisitor_to_json(const InquisitorParams& params);
InquisitorParams inquisitor_from_json(const nlohmann::ordered_json& doc, const std::string& where);

}  // namespace gensynth
