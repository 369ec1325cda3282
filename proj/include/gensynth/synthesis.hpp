// SPDX-License-Identifier: Apache-2.0
//
// The synthesis loop. Each cycle samples one network from the current
// generator, trains and scores it, probes it with stimuli, updates the
// inquisitor from the observed responses and the requirement outcome, and
// applies the inquisitor's proposed change to the generator. Every
// `checkpoint_interval` cycles the generator is validated over a fixed set of
// seeds and kept as the best checkpoint when its family satisfies the
// requirement often enough and beats the incumbent's mean NetScore.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gensynth/dataset.hpp"
#include "gensynth/generator.hpp"
#include "gensynth/inquisitor.hpp"
#include "gensynth/metrics.hpp"
#include "gensynth/trainer.hpp"

namespace gensynth {

struct SynthesisConfig {
    std::uint64_t cycles = 30;
    TrainConfig train;
    std::size_t stimuli = 128;
    double probe_fraction = 1.0;
    std::size_t validation_seeds = 10;
    std::uint64_t checkpoint_interval = 5;
    double satisfaction_floor = 0.9;
    std::uint64_t master_seed = 1;
    double init_logit = 2.0;
    InquisitorConfig inquisitor;

    void validate() const;
    friend bool operator==(const SynthesisConfig&, const SynthesisConfig&) = default;
};

struct SaliencySummary {
    double min = 0;
    double median = 0;
    double max = 0;
    std::size_t observed = 0;
};

struct CycleRecord {
    std::uint64_t cycle = 0;
    std::uint64_t seed = 0;
    Scorecard card;
    std::optional<SaliencySummary> saliency;
    double delta_l1 = 0;
    /// Expected parameter count of the generator after this cycle's update.
    double expected_params = 0;
    bool diverged = false;
};

struct FamilySummary {
    std::vector<std::uint64_t> seeds;
    std::vector<Scorecard> cards;
    std::size_t satisfied = 0;
    double satisfaction_rate = 0;
    std::size_t diverged = 0;
    // Statistics over satisfying members only.
    std::optional<double> mean_params;
    std::optional<double> median_params;
    std::optional<double> mean_netscore;
    std::optional<double> median_netscore;
    std::size_t distinct_graphs = 0;
};

struct CheckpointEval {
    std::uint64_t cycle = 0;
    FamilySummary family;
    bool replaced = false;
    /// Incumbent's mean NetScore after this evaluation.
    std::optional<double> best_netscore;
};

struct BestCheckpoint {
    std::uint64_t cycle = 0;
    Generator generator;
    FamilySummary family;
};

struct SynthesisState {
    SynthesisConfig cfg;
    std::string dataset_digest;
    Generator generator;
    InquisitorParams inquisitor;
    std::vector<CycleRecord> records;
    std::vector<CheckpointEval> checkpoints;
    std::optional<BestCheckpoint> best;

    std::uint64_t completed_cycles() const noexcept { return records.size(); }
};

struct RunOptions {
    /// Concurrent trainings inside family validation. Results do not depend on it.
    unsigned workers = 1;
    std::function<void(const std::string&)> log;
};

/// Candidate seed of cycle k, a pure function of the master seed.
std::uint64_t candidate_seed(std::uint64_t master_seed, std::uint64_t cycle);
/// The fixed seed list used for every checkpoint validation.
std::vector<std::uint64_t> validation_seed_list(std::uint64_t master_seed, std::size_t count);

/// One network per seed, in order, without training.
std::vector<NetworkGraph> generate_family(const Generator& gen, const std::vector<std::uint64_t>& seeds);

/// Samples, trains and scores one network per seed. Member i trains with seed
/// derive_seed(train_cfg.seed, {seeds[i]}); divergence scores as a violation.
/// Throws Error on an empty seed list.
FamilySummary validate_generator(const Generator& gen, const LabeledDataset& ds, const std::vector<std::uint64_t>& seeds,
                                 const TrainConfig& train_cfg, const MetricConfig& metric_cfg,
                                 const RequirementSpec& req, unsigned workers = 1);

/// Builds the initial generator and inquisitor and evaluates the initial
/// generator once (checkpoint at cycle 0). Runs no cycles.
SynthesisState start_synthesis(const NetworkGraph& prototype, const LabeledDataset& ds, const RequirementSpec& req,
                               const MetricConfig& metric_cfg, const SynthesisConfig& cfg, const RunOptions& opts = {});

/// Executes cycles completed+1 .. target. Throws ConfigError when `ds` is not
/// the dataset the state was started with.
void continue_synthesis(SynthesisState& state, const LabeledDataset& ds, std::uint64_t target_cycles,
                        const RunOptions& opts = {});

/// start_synthesis followed by cfg.cycles cycles.
SynthesisState run(const NetworkGraph& prototype, const LabeledDataset& ds, const RequirementSpec& req,
                   const MetricConfig& metric_cfg, const SynthesisConfig& cfg, const RunOptions& opts = {});

nlohmann::ordered_json synthesis_config_to_json(const SynthesisConfig& cfg);
SynthesisConfig synthesis_config_from_json(const nlohmann::ordered_json& doc, const std::string& where);

nlohmann::ordered_json state_to_json(const SynthesisState& state);
/// Throws ConfigError on a version mismatch, digest mismatch or corrupt document.
SynthesisState state_from_json(const nlohmann::ordered_json& doc);

void save_state(const SynthesisState& state, const std::filesystem::path& path);
SynthesisState load_state(const std::filesystem::path& path);

inline constexpr const char* kReportHeader =
    "cycle,seed,accuracy,params,macs,info_density,netscore,satisfies,delta_l1,expected_params";

/// Header plus one row per cycle record.
std::string report_csv(const SynthesisState& state);
/// Run summary: prototype size, checkpoint history, best family statistics.
nlohmann::ordered_json summary_json(const SynthesisState& state);

std::string scorecard_csv_row(const Scorecard& card);

}  // namespace gensynth
