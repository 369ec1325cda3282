// SPDX-License-Identifier: Apache-2.0
#include "gensynth/metrics.hpp"

#include <cmath>

namespace gensynth {

void MetricConfig::validate() const {
    auto positive = [](double x, const char* name) {
        if (!(x > 0) || !std::isfinite(x)) throw ConfigError(name, "must be a positive number");
    };
    positive(kappa, "kappa");
    positive(beta, "beta");
    positive(gamma, "gamma");
    positive(param_unit, "param_unit");
    positive(mac_unit, "mac_unit");
}

void RequirementSpec::validate() const {
    if (!(min_accuracy >= 0 && min_accuracy <= 1)) throw ConfigError("min_accuracy", "must be in [0, 1]");
    if (max_params && *max_params == 0) throw ConfigError("max_params", "must be positive");
    if (max_macs && *max_macs == 0) throw ConfigError("max_macs", "must be positive");
}

double information_density(double accuracy, std::uint64_t params, const MetricConfig& cfg) {
    if (params == 0) throw Error("information density is undefined for a network without parameters");
    return accuracy * 100.0 / (static_cast<double>(params) / cfg.param_unit);
}

double netscore(double accuracy, std::uint64_t params, std::uint64_t macs, const MetricConfig& cfg) {
    if (!(accuracy > 0)) throw Error("NetScore is undefined at zero accuracy");
    if (params == 0 || macs == 0) throw Error("NetScore needs nonzero parameter and MAC counts");
    const double a = accuracy * 100.0;
    const double p = static_cast<double>(params) / cfg.param_unit;
    const double m = static_cast<double>(macs) / cfg.mac_unit;
    return 20.0 * (cfg.kappa * std::log10(a) - cfg.beta * std::log10(p) - cfg.gamma * std::log10(m));
}

bool indicator(double accuracy, std::uint64_t params, std::uint64_t macs, const RequirementSpec& req) {
    if (!(accuracy >= req.min_accuracy)) return false;
    if (req.max_params && params > *req.max_params) return false;
    if (req.max_macs && macs > *req.max_macs) return false;
    return true;
}

Scorecard score(const NetworkGraph& g, const EvalResult& eval, const MetricConfig& cfg, const RequirementSpec& req) {
    Scorecard card;
    card.accuracy = eval.accuracy;
    card.params = count_params(g);
    card.macs = count_macs(g);
    card.info_density = card.params ? information_density(card.accuracy, card.params, cfg) : 0.0;
    if (card.accuracy > 0 && card.params > 0 && card.macs > 0)
        card.netscore = netscore(card.accuracy, card.params, card.macs, cfg);
    card.satisfies = indicator(card, req);
    return card;
}

}  // namespace gensynth
