// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>

#include "gensynth/dataset.hpp"
#include "gensynth/netgraph.hpp"
#include "gensynth/trainer.hpp"

namespace gensynth {

/// NetScore exponents and the divisors that scale raw counts (1e6 = "millions").
struct MetricConfig {
    double kappa = 2.0;
    double beta = 0.5;
    double gamma = 0.5;
    double param_unit = 1e6;
    double mac_unit = 1e6;

    void validate() const;
    friend bool operator==(const MetricConfig&, const MetricConfig&) = default;
};

/// Operational requirements. Every comparison is inclusive.
struct RequirementSpec {
    double min_accuracy = 0.0;
    Split eval_split = Split::Val;
    std::optional<std::uint64_t> max_params;
    std::optional<std::uint64_t> max_macs;

    void validate() const;
    friend bool operator==(const RequirementSpec&, const RequirementSpec&) = default;
};

struct Scorecard {
    double accuracy = 0;
    std::uint64_t params = 0;
    std::uint64_t macs = 0;
    double info_density = 0;
    /// Absent when accuracy is 0 (the logarithm is undefined).
    std::optional<double> netscore;
    bool satisfies = false;

    friend bool operator==(const Scorecard&, const Scorecard&) = default;
};

/// Top-1 percent per `param_unit` parameters. Throws Error when params == 0.
double information_density(double accuracy, std::uint64_t params, const MetricConfig& cfg);

/// 20*log10(a^kappa / (p^beta * m^gamma)) with a in percent, p and m in units.
/// Throws Error when accuracy, params or macs is 0.
double netscore(double accuracy, std::uint64_t params, std::uint64_t macs, const MetricConfig& cfg);

bool indicator(double accuracy, std::uint64_t params, std::uint64_t macs, const RequirementSpec& req);
inline bool indicator(const Scorecard& card, const RequirementSpec& req) {
    return indicator(card.accuracy, card.params, card.macs, req);
}

Scorecard score(const NetworkGraph& g, const EvalResult& eval, const MetricConfig& cfg, const RequirementSpec& req);

}  // namespace gensynth
