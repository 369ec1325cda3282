// SPDX-License-Identifier: Apache-2.0
//
// Run configuration and the subcommands behind the `gensynth` executable.
// Exit codes: 0 success, 1 self-check failure, 2 usage or configuration, 3 runtime.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "gensynth/dataset.hpp"
#include "gensynth/metrics.hpp"
#include "gensynth/netgraph.hpp"
#include "gensynth/synthesis.hpp"

namespace gensynth {

enum ExitCode : int { kExitOk = 0, kExitCheckFailed = 1, kExitConfig = 2, kExitRuntime = 3 };

struct DatasetConfig {
    std::string source = "blobs";  // blobs | csv | idx
    int classes = 4;
    int per_class = 250;
    double spread = 0.15;
    std::uint64_t seed = 11;
    std::filesystem::path path;    // csv
    std::filesystem::path images;  // idx
    std::filesystem::path labels;  // idx
    SplitFractions split{0.8, 0.2, 0.0};
    std::uint64_t split_seed = 0;
};

struct RunConfig {
    DatasetConfig dataset;
    std::filesystem::path prototype;
    RequirementSpec requirement;
    MetricConfig metric;
    SynthesisConfig synthesis;  // carries the trainer and inquisitor sections
};

/// Relative paths resolve against `base_dir`. Throws ConfigError naming the field.
RunConfig parse_run_config(const nlohmann::ordered_json& doc, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// The configured dataset with its split assignment applied.
LabeledDataset load_dataset(const DatasetConfig& cfg);
/// Reads a network document. Throws ConfigError when unreadable or invalid.
NetworkGraph load_network(const std::filesystem::path& path);

struct SynthOptions {
    unsigned workers = 1;
    bool verbose = false;
};

int cmd_synth(const std::filesystem::path& config, const std::filesystem::path& out_dir, const SynthOptions& opts,
              std::ostream& out, std::ostream& err);

/// Either an explicit seed list or `count` seeds 0..count-1.
int cmd_sample(const std::filesystem::path& generator, const std::vector<std::uint64_t>& seeds,
               std::optional<std::uint64_t> count, const std::filesystem::path& out_dir, std::ostream& out,
               std::ostream& err);

int cmd_eval(const std::filesystem::path& network, const std::filesystem::path& config, std::ostream& out,
             std::ostream& err);

/// Re-renders report.csv and summary.json from a saved state without recomputation.
int cmd_report(const std::filesystem::path& state, const std::filesystem::path& out_dir, std::ostream& out,
               std::ostream& err);

int cmd_check(std::ostream& out, std::ostream& err);

/// Parses "1,2,3". Throws ConfigError("seeds", ...) on malformed input.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace gensynth
