// SPDX-License-Identifier: Apache-2.0
#include "gensynth/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "gensynth/generator.hpp"
#include "gensynth/json_util.hpp"
#include "gensynth/selfcheck.hpp"
#include "gensynth/trainer.hpp"

namespace gensynth {

namespace fs = std::filesystem;
using json::ojson;

namespace {

std::string read_file(const fs::path& path, const std::string& field) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(field, "cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ojson parse_document(const std::string& text, const std::string& field) {
    try {
        return ojson::parse(text);
    } catch (const ojson::parse_error& e) {
        throw ConfigError(field, std::string("not valid JSON: ") + e.what());
    }
}

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << content;
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

fs::path resolve(const fs::path& base, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

DatasetConfig parse_dataset(const ojson& doc, const fs::path& base) {
    const std::string where = "dataset";
    json::reject_unknown(doc, {"source", "classes", "per_class", "spread", "seed", "path", "images", "labels",
                               "split", "split_seed"},
                         where);
    DatasetConfig cfg;
    if (doc.contains("source")) cfg.source = json::string(doc, "source", where);
    if (cfg.source != "blobs" && cfg.source != "csv" && cfg.source != "idx")
        throw ConfigError("dataset.source", "must be blobs, csv or idx");
    cfg.classes = static_cast<int>(json::integer_or(doc, "classes", where, cfg.classes));
    cfg.per_class = static_cast<int>(json::integer_or(doc, "per_class", where, cfg.per_class));
    cfg.spread = json::number_or(doc, "spread", where, cfg.spread);
    cfg.seed = json::unsigned_or(doc, "seed", where, cfg.seed);
    cfg.split_seed = json::unsigned_or(doc, "split_seed", where, cfg.split_seed);
    if (cfg.classes < 2) throw ConfigError("dataset.classes", "must be >= 2");
    if (cfg.per_class < 1) throw ConfigError("dataset.per_class", "must be >= 1");
    if (!(cfg.spread > 0) || !std::isfinite(cfg.spread)) throw ConfigError("dataset.spread", "must be > 0");

    for (auto [key, target] : {std::pair{"path", &cfg.path}, {"images", &cfg.images}, {"labels", &cfg.labels}})
        if (doc.contains(key)) *target = resolve(base, json::string(doc, key, where));
    if (cfg.source == "csv" && cfg.path.empty()) throw ConfigError("dataset.path", "required for csv source");
    if (cfg.source == "idx" && cfg.images.empty()) throw ConfigError("dataset.images", "required for idx source");
    if (cfg.source == "idx" && cfg.labels.empty()) throw ConfigError("dataset.labels", "required for idx source");

    if (doc.contains("split")) {
        const auto& s = doc["split"];
        if (!s.is_array() || s.size() != 3) throw ConfigError("dataset.split", "must be [train, val, test]");
        double sum = 0;
        for (std::size_t i = 0; i < 3; ++i) {
            if (!s[i].is_number()) throw ConfigError("dataset.split", "entries must be numbers");
            cfg.split[i] = s[i].get<double>();
            if (!(cfg.split[i] >= 0 && cfg.split[i] <= 1)) throw ConfigError("dataset.split", "entries must be in [0, 1]");
            sum += cfg.split[i];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ConfigError("dataset.split", "fractions sum to " + std::to_string(sum) + ", expected 1");
    }
    return cfg;
}

ojson section(const ojson& doc, const char* key) {
    if (!doc.contains(key)) return ojson::object();
    return doc[key];
}

}  // namespace

RunConfig parse_run_config(const ojson& doc, const fs::path& base_dir) {
    json::reject_unknown(doc, {"dataset", "prototype", "requirement", "metric", "trainer", "inquisitor", "synthesis"},
                         "");
    RunConfig cfg;
    cfg.dataset = parse_dataset(section(doc, "dataset"), base_dir);
    if (doc.contains("prototype")) cfg.prototype = resolve(base_dir, json::string(doc, "prototype", ""));
    cfg.requirement = requirement_from_json(section(doc, "requirement"), "requirement");
    cfg.metric = metric_config_from_json(section(doc, "metric"), "metric");

    ojson synth = section(doc, "synthesis");
    json::object(synth, "synthesis");
    for (const char* nested : {"trainer", "inquisitor"})
        if (synth.contains(nested)) throw ConfigError(std::string("synthesis.") + nested, "unknown key");
    synth["trainer"] = section(doc, "trainer");
    synth["inquisitor"] = section(doc, "inquisitor");
    try {
        cfg.synthesis = synthesis_config_from_json(synth, "synthesis");
    } catch (const ConfigError& e) {
        // Nested sections live at the top level of the run configuration.
        auto field = e.field();
        for (const char* nested : {"synthesis.trainer", "synthesis.inquisitor"})
            if (field.rfind(nested, 0) == 0) field = field.substr(10);
        throw ConfigError(field, json::message_of(e));
    }
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    const auto doc = parse_document(read_file(path, "config"), "config");
    return parse_run_config(doc, path.parent_path());
}

LabeledDataset load_dataset(const DatasetConfig& cfg) {
    LabeledDataset raw = [&] {
        if (cfg.source == "csv") return load_csv(cfg.path);
        if (cfg.source == "idx") return load_idx(cfg.images, cfg.labels);
        return synth_blobs(cfg.classes, cfg.per_class, cfg.spread, cfg.seed);
    }();
    return split(raw, cfg.split, cfg.split_seed);
}

NetworkGraph load_network(const fs::path& path) {
    const auto text = read_file(path, "network");
    try {
        return parse_network(text);
    } catch (const GraphError& e) {
        throw ConfigError("network", "'" + path.string() + "': " + e.what());
    }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto end = std::min(text.find(',', start), text.size());
        const auto item = text.substr(start, end - start);
        std::uint64_t v = 0;
        auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
        if (item.empty() || ec != std::errc() || ptr != item.data() + item.size())
            throw ConfigError("seeds", "'" + item + "' is not an unsigned integer");
        seeds.push_back(v);
        start = end + 1;
    }
    return seeds;
}

namespace {

// Maps exceptions onto exit codes and reports them on `err`.
template <typename Body>
int guarded(std::ostream& err, Body&& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const GraphError& e) {
        err << "error: invalid network: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DatasetError& e) {
        err << "error: dataset: " << e.what();
        if (e.line() >= 0) err << " (line " << e.line() << ")";
        err << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

void write_reports(const SynthesisState& state, const fs::path& out_dir) {
    write_file(out_dir / "report.csv", report_csv(state));
    write_file(out_dir / "summary.json", summary_json(state).dump(2) + "\n");
}

}  // namespace

int cmd_synth(const fs::path& config, const fs::path& out_dir, const SynthOptions& opts, std::ostream& out,
              std::ostream& err) {
    return guarded(err, [&] {
        const auto cfg = load_run_config(config);
        if (cfg.prototype.empty()) throw ConfigError("prototype", "missing");
        const auto prototype = load_network(cfg.prototype);
        const auto ds = load_dataset(cfg.dataset);
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw ConfigError("out", "cannot create '" + out_dir.string() + "': " + ec.message());

        RunOptions run_opts;
        run_opts.workers = opts.workers;
        if (opts.verbose) run_opts.log = [&](const std::string& line) { err << line << '\n'; };
        const auto state = run(prototype, ds, cfg.requirement, cfg.metric, cfg.synthesis, run_opts);

        save_state(state, out_dir / "state.json");
        write_reports(state, out_dir);
        if (!state.best) {
            err << "error: no checkpoint reached the satisfaction floor\n";
            return static_cast<int>(kExitRuntime);
        }
        write_file(out_dir / "best_generator.json",
                   generator_to_json(state.best->generator, {state.best->cycle, cfg.synthesis.master_seed}).dump(1) +
                       "\n");
        out << "best checkpoint: cycle " << state.best->cycle << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_sample(const fs::path& generator, const std::vector<std::uint64_t>& seeds, std::optional<std::uint64_t> count,
               const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto gen = generator_from_json(parse_document(read_file(generator, "generator"), "generator"));
        std::vector<std::uint64_t> list = seeds;
        if (count) {
            if (!list.empty()) throw ConfigError("seeds", "give either a seed list or a count");
            for (std::uint64_t s = 0; s < *count; ++s) list.push_back(s);
        }
        if (list.empty()) throw ConfigError("seeds", "no seeds given");
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw ConfigError("out", "cannot create '" + out_dir.string() + "': " + ec.message());
        const auto family = generate_family(gen, list);
        for (std::size_t i = 0; i < list.size(); ++i) {
            const auto path = out_dir / ("network_" + std::to_string(list[i]) + ".json");
            write_file(path, serialize(family[i]) + "\n");
            out << path.string() << '\n';
        }
        return static_cast<int>(kExitOk);
    });
}

int cmd_eval(const fs::path& network, const fs::path& config, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto g = load_network(network);
        const auto cfg = load_run_config(config);
        const auto ds = load_dataset(cfg.dataset);
        if (g.input_shape() != ds.sample_shape())
            throw ConfigError("network", "input shape " + g.input_shape().to_string() +
                                             " does not match dataset samples " + ds.sample_shape().to_string());
        const auto trained = train(g, ds, cfg.synthesis.train);
        const auto eval = evaluate(g, trained.weights, ds, cfg.requirement.eval_split);
        out << scorecard_csv_row(score(g, eval, cfg.metric, cfg.requirement)) << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_report(const fs::path& state_path, const fs::path& out_dir, std::ostream& out, std::ostream& err) {
    return guarded(err, [&] {
        const auto state = load_state(state_path);
        std::error_code ec;
        fs::create_directories(out_dir, ec);
        if (ec) throw ConfigError("out", "cannot create '" + out_dir.string() + "': " + ec.message());
        write_reports(state, out_dir);
        out << "wrote " << (out_dir / "report.csv").string() << " and " << (out_dir / "summary.json").string() << '\n';
        return static_cast<int>(kExitOk);
    });
}

int cmd_check(std::ostream& out, std::ostream& err) {
    bool ok = true;
    for (const auto& r : selfcheck::run_all()) {
        out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
        ok = ok && r.passed;
    }
    if (!ok) err << "self-check failed\n";
    return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace gensynth
