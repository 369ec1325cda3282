// SPDX-License-Identifier: Apache-2.0
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gensynth/cli.hpp"

int main(int argc, char** argv) {
    using namespace gensynth;
    CLI::App app{"Generative synthesis of efficient feedforward networks"};
    app.require_subcommand(1);

    std::string config, out, generator, seeds, network, state;
    std::optional<std::uint64_t> count;
    SynthOptions synth_opts;

    auto* synth = app.add_subcommand("synth", "run a synthesis from a configuration");
    synth->add_option("--config", config, "run configuration (JSON)")->required();
    synth->add_option("--out", out, "output directory")->required();
    synth->add_option("--workers", synth_opts.workers, "concurrent trainings during validation")
        ->check(CLI::PositiveNumber);
    synth->add_flag("--verbose", synth_opts.verbose, "log each cycle to standard error");

    auto* sample = app.add_subcommand("sample", "write networks sampled from a generator checkpoint");
    sample->add_option("--generator", generator, "generator checkpoint")->required();
    auto* seeds_opt = sample->add_option("--seeds", seeds, "comma-separated seed values");
    auto* count_opt = sample->add_option("--count", count, "use seeds 0..count-1");
    seeds_opt->excludes(count_opt);
    sample->add_option("--out", out, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "train and score one network");
    eval->add_option("--network", network, "network document")->required();
    eval->add_option("--config", config, "run configuration (JSON)")->required();

    auto* report = app.add_subcommand("report", "re-render reports from a saved state");
    report->add_option("--state", state, "state checkpoint")->required();
    report->add_option("--out", out, "output directory")->required();

    app.add_subcommand("check", "run the built-in oracles");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (*synth) return cmd_synth(config, out, synth_opts, std::cout, std::cerr);
    if (*sample) {
        std::vector<std::uint64_t> list;
        if (!seeds.empty()) {
            try {
                list = parse_seed_list(seeds);
            } catch (const ConfigError& e) {
                std::cerr << "error: " << e.what() << '\n';
                return kExitConfig;
            }
        } else if (!count) {
            std::cerr << "error: sample needs --seeds or --count\n";
            return kExitConfig;
        }
        return cmd_sample(generator, list, count, out, std::cout, std::cerr);
    }
    if (*eval) return cmd_eval(network, config, std::cout, std::cerr);
    if (*report) return cmd_report(state, out, std::cout, std::cerr);
    return cmd_check(std::cout, std::cerr);
}
