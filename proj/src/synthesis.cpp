// SPDX-License-Identifier: Apache-2.0
#include "gensynth/synthesis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "gensynth/digest.hpp"
#include "gensynth/format.hpp"
#include "gensynth/json_util.hpp"
#include "gensynth/rng.hpp"

namespace gensynth {

using json::ojson;

void SynthesisConfig::validate() const {
    try {
        train.validate();
    } catch (const ConfigError& e) {
        throw json::rebase("trainer", e);
    }
    try {
        inquisitor.validate();
    } catch (const ConfigError& e) {
        throw json::rebase("inquisitor", e);
    }
    if (stimuli < 1) throw ConfigError("synthesis.stimuli", "must be >= 1");
    if (!(probe_fraction > 0 && probe_fraction <= 1)) throw ConfigError("synthesis.probe_fraction", "must be in (0, 1]");
    if (validation_seeds < 1) throw ConfigError("synthesis.validation_seeds", "must be >= 1");
    if (checkpoint_interval < 1) throw ConfigError("synthesis.checkpoint_interval", "must be >= 1");
    if (!(satisfaction_floor >= 0 && satisfaction_floor <= 1))
        throw ConfigError("synthesis.satisfaction_floor", "must be in [0, 1]");
    if (!std::isfinite(init_logit)) throw ConfigError("synthesis.init_logit", "must be finite");
}

std::uint64_t candidate_seed(std::uint64_t master_seed, std::uint64_t cycle) {
    return derive_seed(master_seed, {tag("candidate"), cycle});
}

std::vector<std::uint64_t> validation_seed_list(std::uint64_t master_seed, std::size_t count) {
    std::vector<std::uint64_t> seeds(count);
    for (std::size_t i = 0; i < count; ++i) seeds[i] = derive_seed(master_seed, {tag("validation-seed"), i});
    return seeds;
}

std::vector<NetworkGraph> generate_family(const Generator& gen, const std::vector<std::uint64_t>& seeds) {
    std::vector<NetworkGraph> family;
    family.reserve(seeds.size());
    for (auto s : seeds) family.push_back(sample(gen, Seed{s}));
    return family;
}

namespace {

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct MemberResult {
    Scorecard card;
    bool diverged = false;
    std::string document;
};

// Trains one sampled network and scores it against the requirement.
MemberResult evaluate_member(const NetworkGraph& net, const LabeledDataset& ds, const TrainConfig& cfg,
                             const MetricConfig& metric_cfg, const RequirementSpec& req, WeightStore* weights = nullptr) {
    MemberResult r;
    r.document = serialize(net);
    try {
        auto trained = train(net, ds, cfg);
        EvalResult eval = req.eval_split == Split::Val && trained.val ? *trained.val
                                                                     : gensynth::evaluate(net, trained.weights, ds, req.eval_split);
        r.card = score(net, eval, metric_cfg, req);
        if (weights) *weights = std::move(trained.weights);
    } catch (const DivergenceError&) {
        r.diverged = true;
        r.card = score(net, EvalResult{0.0, 0.0}, metric_cfg, req);
        r.card.satisfies = false;
    }
    return r;
}

}  // namespace

FamilySummary validate_generator(const Generator& gen, const LabeledDataset& ds, const std::vector<std::uint64_t>& seeds,
                                 const TrainConfig& train_cfg, const MetricConfig& metric_cfg,
                                 const RequirementSpec& req, unsigned workers) {
    if (seeds.empty()) throw Error("validate_generator needs at least one seed");
    std::vector<MemberResult> results(seeds.size());
    auto work = [&](std::size_t i) {
        TrainConfig cfg = train_cfg;
        cfg.seed = derive_seed(train_cfg.seed, {seeds[i]});
        results[i] = evaluate_member(sample(gen, Seed{seeds[i]}), ds, cfg, metric_cfg, req);
    };
    const unsigned threads = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(seeds.size())));
    if (threads == 1) {
        for (std::size_t i = 0; i < seeds.size(); ++i) work(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::exception_ptr> errors(threads);
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t i; (i = next.fetch_add(1)) < seeds.size();) work(i);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    FamilySummary f;
    f.seeds = seeds;
    std::set<std::string> distinct;
    std::vector<double> params, scores;
    for (auto& r : results) {
        distinct.insert(r.document);
        f.diverged += r.diverged;
        if (r.card.satisfies) {
            ++f.satisfied;
            params.push_back(static_cast<double>(r.card.params));
            if (r.card.netscore) scores.push_back(*r.card.netscore);
        }
        f.cards.push_back(r.card);
    }
    f.satisfaction_rate = static_cast<double>(f.satisfied) / static_cast<double>(seeds.size());
    f.distinct_graphs = distinct.size();
    if (!params.empty()) {
        f.mean_params = std::accumulate(params.begin(), params.end(), 0.0) / static_cast<double>(params.size());
        f.median_params = median_of(params);
    }
    if (!scores.empty()) {
        f.mean_netscore = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
        f.median_netscore = median_of(scores);
    }
    return f;
}

namespace {

void emit(const RunOptions& opts, const std::string& line) {
    if (opts.log) opts.log(line);
}

void checkpoint(SynthesisState& state, const LabeledDataset& ds, std::uint64_t cycle, const RunOptions& opts) {
    const auto& cfg = state.cfg;
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = derive_seed(cfg.master_seed, {tag("validation-train"), cycle, cfg.train.seed});
    CheckpointEval ev;
    ev.cycle = cycle;
    ev.family = validate_generator(state.generator, ds, validation_seed_list(cfg.master_seed, cfg.validation_seeds),
                                   train_cfg, state.generator.metric_config(), state.generator.requirement(),
                                   opts.workers);
    const auto& fam = ev.family;
    const bool eligible = fam.satisfaction_rate >= cfg.satisfaction_floor && fam.mean_netscore.has_value();
    if (eligible && (!state.best || *fam.mean_netscore > *state.best->family.mean_netscore)) {
        if (state.best && !(*fam.mean_netscore >= *state.best->family.mean_netscore))
            throw Error("best-checkpoint NetScore would decrease");
        state.best = BestCheckpoint{cycle, state.generator, fam};
        ev.replaced = true;
    }
    if (state.best) ev.best_netscore = state.best->family.mean_netscore;
    std::ostringstream msg;
    msg << "checkpoint cycle " << cycle << ": satisfaction " << fam.satisfied << "/" << fam.seeds.size();
    if (fam.mean_netscore) msg << ", mean netscore " << format_double(*fam.mean_netscore);
    if (fam.median_params) msg << ", median params " << format_double(*fam.median_params);
    msg << (ev.replaced ? " (new best)" : "");
    emit(opts, msg.str());
    state.checkpoints.push_back(std::move(ev));
}

void run_cycle(SynthesisState& state, const LabeledDataset& ds, std::uint64_t k, const RunOptions& opts) {
    const auto& cfg = state.cfg;
    const auto units = state.generator.params().retention_logits.size();
    CycleRecord rec;
    rec.cycle = k;
    rec.seed = candidate_seed(cfg.master_seed, k);

    const SampledNetwork sampled = sample_with_mask(state.generator, Seed{rec.seed});
    TrainConfig train_cfg = cfg.train;
    train_cfg.seed = derive_seed(cfg.master_seed, {tag("candidate-train"), k, rec.seed, cfg.train.seed});
    WeightStore weights;
    auto member = evaluate_member(sampled.graph, ds, train_cfg, state.generator.metric_config(),
                                  state.generator.requirement(), &weights);
    rec.card = member.card;
    rec.diverged = member.diverged;

    SaliencyMap sal;
    sal.scores.assign(units, std::nullopt);
    if (!member.diverged) {
        const auto stimuli = build_stimulus(ds, cfg.stimuli, derive_seed(cfg.master_seed, {tag("stimulus"), k}));
        const auto selection =
            select_fraction(sampled.graph, cfg.probe_fraction, derive_seed(cfg.master_seed, {tag("probe"), k}));
        const auto responses = probe(sampled.graph, weights, stimuli, selection, state.inquisitor.cfg.bins);
        sal = saliency(responses, sampled, units);
        std::vector<double> observed;
        for (const auto& s : sal.scores)
            if (s) observed.push_back(*s);
        if (!observed.empty()) {
            auto [lo, hi] = std::minmax_element(observed.begin(), observed.end());
            rec.saliency = SaliencySummary{*lo, median_of(observed), *hi, observed.size()};
        }
    } else {
        emit(opts, "cycle " + std::to_string(k) + ": training diverged, treated as a violation");
    }

    state.inquisitor = update_inquisitor(state.inquisitor, sal, rec.card.satisfies);
    const ParamDelta delta = propose_delta(state.inquisitor, state.generator, sal);
    rec.delta_l1 = std::accumulate(delta.values.begin(), delta.values.end(), 0.0,
                                   [](double acc, double d) { return acc + std::abs(d); });
    state.generator = apply_delta(state.generator, delta);
    rec.expected_params = expected_params(state.generator);

    std::ostringstream msg;
    msg << "cycle " << k << ": params " << rec.card.params << ", accuracy " << format_double(rec.card.accuracy)
        << ", satisfies " << rec.card.satisfies << ", expected params " << format_double(rec.expected_params);
    emit(opts, msg.str());
    state.records.push_back(std::move(rec));
}

}  // namespace

SynthesisState start_synthesis(const NetworkGraph& prototype, const LabeledDataset& ds, const RequirementSpec& req,
                               const MetricConfig& metric_cfg, const SynthesisConfig& cfg, const RunOptions& opts) {
    cfg.validate();
    if (ds.sample_shape() != prototype.input_shape())
        throw ConfigError("prototype", "input shape " + prototype.input_shape().to_string() +
                                           " does not match dataset samples " + ds.sample_shape().to_string());
    if (ds.indices(Split::Train).empty()) throw ConfigError("dataset.split", "train split is empty");
    if (ds.indices(req.eval_split).empty())
        throw ConfigError("requirement.eval_split", "split '" + std::string(split_name(req.eval_split)) + "' is empty");
    if (cfg.stimuli > ds.indices(Split::Train).size())
        throw ConfigError("synthesis.stimuli", "exceeds the train split size");

    Generator gen = init_generator(prototype, req, metric_cfg, cfg.init_logit);
    SynthesisState state{cfg,
                         ds.digest(),
                         gen,
                         init_inquisitor(cfg.inquisitor, gen.params().retention_logits.size()),
                         {},
                         {},
                         std::nullopt};
    checkpoint(state, ds, 0, opts);
    return state;
}

void continue_synthesis(SynthesisState& state, const LabeledDataset& ds, std::uint64_t target_cycles,
                        const RunOptions& opts) {
    if (ds.digest() != state.dataset_digest)
        throw ConfigError("dataset", "dataset differs from the one this synthesis state was started with");
    if (target_cycles < state.completed_cycles())
        throw ConfigError("synthesis.cycles", "state already has more cycles than requested");
    state.cfg.cycles = target_cycles;
    for (std::uint64_t k = state.completed_cycles() + 1; k <= target_cycles; ++k) {
        run_cycle(state, ds, k, opts);
        if (k % state.cfg.checkpoint_interval == 0) checkpoint(state, ds, k, opts);
    }
}

SynthesisState run(const NetworkGraph& prototype, const LabeledDataset& ds, const RequirementSpec& req,
                   const MetricConfig& metric_cfg, const SynthesisConfig& cfg, const RunOptions& opts) {
    SynthesisState state = start_synthesis(prototype, ds, req, metric_cfg, cfg, opts);
    continue_synthesis(state, ds, cfg.cycles, opts);
    return state;
}

// ---------------------------------------------------------------------------
// Documents

namespace {

ojson optional_number(const std::optional<double>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<double> read_optional(const ojson& doc, std::string_view key, const std::string& where) {
    const auto& v = json::field(doc, key, where);
    if (v.is_null()) return std::nullopt;
    if (!v.is_number()) throw ConfigError(json::join(where, key), "must be a number or null");
    return v.get<double>();
}

bool read_bool(const ojson& doc, std::string_view key, const std::string& where) {
    const auto& v = json::field(doc, key, where);
    if (!v.is_boolean()) throw ConfigError(json::join(where, key), "must be a boolean");
    return v.get<bool>();
}

ojson train_config_to_json(const TrainConfig& cfg) {
    return ojson{{"epochs", cfg.epochs},
                 {"batch_size", cfg.batch_size},
                 {"learning_rate", cfg.learning_rate},
                 {"momentum", cfg.momentum},
                 {"seed", cfg.seed}};
}

TrainConfig train_config_from_json(const ojson& doc, const std::string& where) {
    json::reject_unknown(doc, {"epochs", "batch_size", "learning_rate", "momentum", "seed"}, where);
    TrainConfig cfg;
    cfg.epochs = static_cast<int>(json::integer_or(doc, "epochs", where, cfg.epochs));
    cfg.batch_size = static_cast<int>(json::integer_or(doc, "batch_size", where, cfg.batch_size));
    cfg.learning_rate = json::number_or(doc, "learning_rate", where, cfg.learning_rate);
    cfg.momentum = json::number_or(doc, "momentum", where, cfg.momentum);
    cfg.seed = json::unsigned_or(doc, "seed", where, cfg.seed);
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw json::rebase(where, e);
    }
    return cfg;
}

ojson scorecard_to_json(const Scorecard& c) {
    return ojson{{"accuracy", c.accuracy},
                 {"params", c.params},
                 {"macs", c.macs},
                 {"info_density", c.info_density},
                 {"netscore", optional_number(c.netscore)},
                 {"satisfies", c.satisfies}};
}

Scorecard scorecard_from_json(const ojson& doc, const std::string& where) {
    json::reject_unknown(doc, {"accuracy", "params", "macs", "info_density", "netscore", "satisfies"}, where);
    Scorecard c;
    c.accuracy = json::number(doc, "accuracy", where);
    c.params = json::unsigned_integer(doc, "params", where);
    c.macs = json::unsigned_integer(doc, "macs", where);
    c.info_density = json::number(doc, "info_density", where);
    c.netscore = read_optional(doc, "netscore", where);
    c.satisfies = read_bool(doc, "satisfies", where);
    return c;
}

ojson family_to_json(const FamilySummary& f) {
    ojson cards = ojson::array();
    for (const auto& c : f.cards) cards.push_back(scorecard_to_json(c));
    return ojson{{"seeds", f.seeds},
                 {"cards", std::move(cards)},
                 {"satisfied", f.satisfied},
                 {"satisfaction_rate", f.satisfaction_rate},
                 {"diverged", f.diverged},
                 {"mean_params", optional_number(f.mean_params)},
                 {"median_params", optional_number(f.median_params)},
                 {"mean_netscore", optional_number(f.mean_netscore)},
                 {"median_netscore", optional_number(f.median_netscore)},
                 {"distinct_graphs", f.distinct_graphs}};
}

FamilySummary family_from_json(const ojson& doc, const std::string& where) {
    json::reject_unknown(doc, {"seeds", "cards", "satisfied", "satisfaction_rate", "diverged", "mean_params",
                               "median_params", "mean_netscore", "median_netscore", "distinct_graphs"},
                         where);
    FamilySummary f;
    for (const auto& s : json::field(doc, "seeds", where)) {
        if (!s.is_number_unsigned() && !s.is_number_integer())
            throw ConfigError(json::join(where, "seeds"), "entries must be integers");
        f.seeds.push_back(s.get<std::uint64_t>());
    }
    const auto& cards = json::field(doc, "cards", where);
    if (!cards.is_array()) throw ConfigError(json::join(where, "cards"), "must be an array");
    for (const auto& c : cards) f.cards.push_back(scorecard_from_json(c, json::join(where, "cards")));
    f.satisfied = json::unsigned_integer(doc, "satisfied", where);
    f.satisfaction_rate = json::number(doc, "satisfaction_rate", where);
    f.diverged = json::unsigned_integer(doc, "diverged", where);
    f.mean_params = read_optional(doc, "mean_params", where);
    f.median_params = read_optional(doc, "median_params", where);
    f.mean_netscore = read_optional(doc, "mean_netscore", where);
    f.median_netscore = read_optional(doc, "median_netscore", where);
    f.distinct_graphs = json::unsigned_integer(doc, "distinct_graphs", where);
    return f;
}

ojson record_to_json(const CycleRecord& r) {
    ojson sal = nullptr;
    if (r.saliency)
        sal = ojson{{"min", r.saliency->min},
                    {"median", r.saliency->median},
                    {"max", r.saliency->max},
                    {"observed", r.saliency->observed}};
    return ojson{{"cycle", r.cycle},
                 {"seed", r.seed},
                 {"card", scorecard_to_json(r.card)},
                 {"saliency", std::move(sal)},
                 {"delta_l1", r.delta_l1},
                 {"expected_params", r.expected_params},
                 {"diverged", r.diverged}};
}

CycleRecord record_from_json(const ojson& doc, const std::string& where) {
    json::reject_unknown(doc, {"cycle", "seed", "card", "saliency", "delta_l1", "expected_params", "diverged"}, where);
    CycleRecord r;
    r.cycle = json::unsigned_integer(doc, "cycle", where);
    r.seed = json::unsigned_integer(doc, "seed", where);
    r.card = scorecard_from_json(json::field(doc, "card", where), json::join(where, "card"));
    const auto& sal = json::field(doc, "saliency", where);
    if (!sal.is_null()) {
        const auto w = json::join(where, "saliency");
        json::reject_unknown(sal, {"min", "median", "max", "observed"}, w);
        r.saliency = SaliencySummary{json::number(sal, "min", w), json::number(sal, "median", w),
                                     json::number(sal, "max", w), json::unsigned_integer(sal, "observed", w)};
    }
    r.delta_l1 = json::number(doc, "delta_l1", where);
    r.expected_params = json::number(doc, "expected_params", where);
    r.diverged = read_bool(doc, "diverged", where);
    return r;
}

ojson state_body(const SynthesisState& s) {
    ojson doc;
    doc["version"] = 1;
    doc["config"] = synthesis_config_to_json(s.cfg);
    doc["dataset_digest"] = s.dataset_digest;
    doc["generator"] = generator_to_json(s.generator, {s.completed_cycles(), s.cfg.master_seed});
    doc["inquisitor"] = inquisitor_to_json(s.inquisitor);
    ojson records = ojson::array();
    for (const auto& r : s.records) records.push_back(record_to_json(r));
    doc["records"] = std::move(records);
    ojson checkpoints = ojson::array();
    for (const auto& c : s.checkpoints)
        checkpoints.push_back(ojson{{"cycle", c.cycle},
                                    {"family", family_to_json(c.family)},
                                    {"replaced", c.replaced},
                                    {"best_netscore", optional_number(c.best_netscore)}});
    doc["checkpoints"] = std::move(checkpoints);
    if (s.best)
        doc["best"] = ojson{{"cycle", s.best->cycle},
                            {"generator", generator_to_json(s.best->generator, {s.best->cycle, s.cfg.master_seed})},
                            {"family", family_to_json(s.best->family)}};
    else
        doc["best"] = nullptr;
    doc["rng"] = ojson{{"master_seed", s.cfg.master_seed},
                       {"next_cycle", s.completed_cycles() + 1},
                       {"next_candidate_seed", candidate_seed(s.cfg.master_seed, s.completed_cycles() + 1)}};
    return doc;
}

}  // namespace

ojson synthesis_config_to_json(const SynthesisConfig& cfg) {
    return ojson{{"cycles", cfg.cycles},
                 {"stimuli", cfg.stimuli},
                 {"probe_fraction", cfg.probe_fraction},
                 {"validation_seeds", cfg.validation_seeds},
                 {"checkpoint_interval", cfg.checkpoint_interval},
                 {"satisfaction_floor", cfg.satisfaction_floor},
                 {"master_seed", cfg.master_seed},
                 {"init_logit", cfg.init_logit},
                 {"trainer", train_config_to_json(cfg.train)},
                 {"inquisitor", inquisitor_config_to_json(cfg.inquisitor)}};
}

SynthesisConfig synthesis_config_from_json(const ojson& doc, const std::string& where) {
    json::reject_unknown(doc, {"cycles", "stimuli", "probe_fraction", "validation_seeds", "checkpoint_interval",
                               "satisfaction_floor", "master_seed", "init_logit", "trainer", "inquisitor"},
                         where);
    SynthesisConfig cfg;
    cfg.cycles = json::unsigned_or(doc, "cycles", where, cfg.cycles);
    cfg.stimuli = json::unsigned_or(doc, "stimuli", where, cfg.stimuli);
    cfg.probe_fraction = json::number_or(doc, "probe_fraction", where, cfg.probe_fraction);
    cfg.validation_seeds = json::unsigned_or(doc, "validation_seeds", where, cfg.validation_seeds);
    cfg.checkpoint_interval = json::unsigned_or(doc, "checkpoint_interval", where, cfg.checkpoint_interval);
    cfg.satisfaction_floor = json::number_or(doc, "satisfaction_floor", where, cfg.satisfaction_floor);
    cfg.master_seed = json::unsigned_or(doc, "master_seed", where, cfg.master_seed);
    cfg.init_logit = json::number_or(doc, "init_logit", where, cfg.init_logit);
    if (doc.contains("trainer")) cfg.train = train_config_from_json(doc["trainer"], json::join(where, "trainer"));
    if (doc.contains("inquisitor"))
        cfg.inquisitor = inquisitor_config_from_json(doc["inquisitor"], json::join(where, "inquisitor"));
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        auto field = e.field();
        if (field.rfind("synthesis.", 0) == 0) field = field.substr(10);
        throw ConfigError(json::join(where, field), json::message_of(e));
    }
    return cfg;
}

ojson state_to_json(const SynthesisState& state) {
    ojson doc = state_body(state);
    doc["digest"] = sha256_hex(doc.dump());
    return doc;
}

SynthesisState state_from_json(const ojson& doc) {
    const std::string where = "state";
    json::reject_unknown(doc, {"version", "config", "dataset_digest", "generator", "inquisitor", "records",
                               "checkpoints", "best", "rng", "digest"},
                         where);
    if (json::integer(doc, "version", where) != 1) throw ConfigError("state.version", "unsupported version");
    auto cfg = synthesis_config_from_json(json::field(doc, "config", where), "state.config");
    auto generator = generator_from_json(json::field(doc, "generator", where));
    auto inquisitor = inquisitor_from_json(json::field(doc, "inquisitor", where), "state.inquisitor");
    if (inquisitor.ema_saliency.size() != generator.params().retention_logits.size())
        throw ConfigError("state.inquisitor.ema_saliency", "not aligned with the generator");

    SynthesisState s{cfg, json::string(doc, "dataset_digest", where), generator, inquisitor, {}, {}, std::nullopt};
    const auto& records = json::field(doc, "records", where);
    if (!records.is_array()) throw ConfigError("state.records", "must be an array");
    for (const auto& r : records) {
        s.records.push_back(record_from_json(r, "state.records"));
        if (s.records.back().cycle != s.records.size())
            throw ConfigError("state.records", "cycle indices must run 1, 2, ... without gaps");
    }
    const auto& checkpoints = json::field(doc, "checkpoints", where);
    if (!checkpoints.is_array()) throw ConfigError("state.checkpoints", "must be an array");
    for (const auto& c : checkpoints) {
        const std::string w = "state.checkpoints";
        json::reject_unknown(c, {"cycle", "family", "replaced", "best_netscore"}, w);
        s.checkpoints.push_back(CheckpointEval{json::unsigned_integer(c, "cycle", w),
                                               family_from_json(json::field(c, "family", w), w + ".family"),
                                               read_bool(c, "replaced", w), read_optional(c, "best_netscore", w)});
    }
    const auto& best = json::field(doc, "best", where);
    if (!best.is_null()) {
        const std::string w = "state.best";
        json::reject_unknown(best, {"cycle", "generator", "family"}, w);
        s.best = BestCheckpoint{json::unsigned_integer(best, "cycle", w),
                                generator_from_json(json::field(best, "generator", w)),
                                family_from_json(json::field(best, "family", w), w + ".family")};
    }
    const std::string stored = json::string(doc, "digest", where);
    if (stored != sha256_hex(state_body(s).dump()))
        throw ConfigError("state.digest", "state content does not match its digest");
    return s;
}

void save_state(const SynthesisState& state, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << state_to_json(state).dump(1) << '\n';
    if (!out) throw Error("failed writing '" + path.string() + "'");
}

SynthesisState load_state(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("state", "cannot open '" + path.string() + "'");
    ojson doc;
    try {
        doc = ojson::parse(in);
    } catch (const ojson::parse_error& e) {
        throw ConfigError("state", std::string("corrupt document: ") + e.what());
    }
    return state_from_json(doc);
}

std::string scorecard_csv_row(const Scorecard& c) {
    std::ostringstream os;
    os << format_double(c.accuracy) << ',' << c.params << ',' << c.macs << ',' << format_double(c.info_density) << ','
       << (c.netscore ? format_double(*c.netscore) : "undefined") << ',' << (c.satisfies ? 1 : 0);
    return os.str();
}

std::string report_csv(const SynthesisState& state) {
    std::ostringstream os;
    os << kReportHeader << '\n';
    for (const auto& r : state.records)
        os << r.cycle << ',' << r.seed << ',' << scorecard_csv_row(r.card) << ',' << format_double(r.delta_l1) << ','
           << format_double(r.expected_params) << '\n';
    return os.str();
}

ojson summary_json(const SynthesisState& state) {
    const auto& proto = state.generator.prototype();
    const auto proto_params = count_params(proto);
    ojson doc;
    doc["cycles"] = state.completed_cycles();
    doc["master_seed"] = state.cfg.master_seed;
    doc["prototype"] = ojson{{"params", proto_params}, {"macs", count_macs(proto)}};
    auto [lo, hi] = keep_probability_range(state.generator);
    doc["generator"] = ojson{{"expected_params", expected_params(state.generator)},
                             {"min_keep_probability", lo},
                             {"max_keep_probability", hi}};
    ojson history = ojson::array();
    for (const auto& c : state.checkpoints)
        history.push_back(ojson{{"cycle", c.cycle},
                                {"satisfaction_rate", c.family.satisfaction_rate},
                                {"mean_netscore", optional_number(c.family.mean_netscore)},
                                {"median_params", optional_number(c.family.median_params)},
                                {"distinct_graphs", c.family.distinct_graphs},
                                {"replaced", c.replaced},
                                {"best_netscore", optional_number(c.best_netscore)}});
    doc["checkpoints"] = std::move(history);
    if (state.best) {
        const auto& f = state.best->family;
        ojson best{{"cycle", state.best->cycle},
                   {"satisfaction_rate", f.satisfaction_rate},
                   {"mean_netscore", optional_number(f.mean_netscore)},
                   {"median_netscore", optional_number(f.median_netscore)},
                   {"mean_params", optional_number(f.mean_params)},
                   {"median_params", optional_number(f.median_params)},
                   {"distinct_graphs", f.distinct_graphs}};
        best["median_params_ratio"] =
            f.median_params ? ojson(*f.median_params / static_cast<double>(proto_params)) : ojson(nullptr);
        doc["best"] = std::move(best);
    } else {
        doc["best"] = nullptr;
    }
    return doc;
}

}  // namespace gensynth
