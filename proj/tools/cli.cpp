#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "persistlens/analysis.hpp"
#include "persistlens/annotate.hpp"
#include "persistlens/backend.hpp"
#include "persistlens/error.hpp"
#include "persistlens/fileio.hpp"
#include "persistlens/ingest.hpp"
#include "persistlens/metrics.hpp"
#include "persistlens/report.hpp"
#include "persistlens/rules.hpp"
#include "persistlens/synth.hpp"
#include "persistlens/taxonomy.hpp"

#ifndef PERSISTLENS_DEFAULT_CATALOG
#define PERSISTLENS_DEFAULT_CATALOG "attack_persistence.json"
#endif

namespace persistlens::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Workspace file names shared by the stage commands.
constexpr const char* kCorpusFile = "corpus.json";
constexpr const char* kPsychometricsFile = "psychometrics.csv";
constexpr const char* kAnnotationsFile = "annotations.jsonl";
constexpr const char* kFailuresFile = "failures.jsonl";
constexpr const char* kMetricsFile = "metrics.csv";
constexpr const char* kDistributionFile = "distribution.json";
constexpr const char* kAnalysisFile = "analysis.json";
constexpr const char* kReportDir = "report";

struct Settings {
    fs::path out = "persistlens-out";
    fs::path catalog = PERSISTLENS_DEFAULT_CATALOG;
    fs::path notes;
    fs::path psychometrics;
    fs::path metrics;
    fs::path cache;
    std::string backend = "api";
    std::string model;
    bool model_from_env = false;  // LLM_MODEL names an API model; the rules backend ignores it
    std::string base_url;
    std::string api_key;
    std::size_t max_inflight = 4;
    std::size_t context_window = 2;
    double fuzzy_threshold = kDefaultFuzzyThreshold;
    double alpha = 0.05;
    bool strict = false;
    bool allow_partial = false;
    std::vector<std::string> stage_boundaries;
    std::size_t bins = 8;
    std::string window_start;
    std::string window_end;
};

// Raw flag targets; which ones count is decided by CLI::App::count.
struct Flags {
    std::string out, catalog, notes, psychometrics, metrics, cache, backend, model, config;
    std::size_t max_inflight = 4, context_window = 2, bins = 8;
    double fuzzy_threshold = kDefaultFuzzyThreshold, alpha = 0.05;
    bool strict = false, allow_partial = false;
    std::string stage_boundaries, window_start, window_end;
};

struct SynthFlags {
    SynthConfig config;
    std::string out = "synth-out";
    std::string catalog;
};

void add_common(CLI::App* sub, Flags& f) {
    sub->add_option("--out", f.out, "Workspace directory for stage files (default: persistlens-out)");
    sub->add_option("--config", f.config, "JSON config file; CLI flags and environment take precedence");
    sub->add_option("--catalog", f.catalog, "ATT&CK persistence catalog JSON (default: bundled catalog)");
}

void add_ingest(CLI::App* sub, Flags& f) {
    sub->add_option("--notes", f.notes, "Directory of <participant>.opnote files");
    sub->add_option("--psychometrics", f.psychometrics, "Psychometrics CSV (participant_id,division,grips,admc_rc1,admc_rc2)");
    sub->add_flag("--allow-partial", f.allow_partial, "Warn instead of failing on unmatched participants");
    sub->add_option("--window-start", f.window_start, "Reject note entries before this time (YYYY-MM-DD HH:MM:SS)");
    sub->add_option("--window-end", f.window_end, "Reject note entries after this time (YYYY-MM-DD HH:MM:SS)");
}

void add_annotate(CLI::App* sub, Flags& f) {
    sub->add_option("--backend", f.backend, "Annotation backend: api, rules or replay (default: api)")
        ->check(CLI::IsMember({"api", "rules", "replay"}));
    sub->add_option("--cache", f.cache, "Response cache directory (read-through; required for replay)");
    sub->add_option("--model", f.model, "Model id (default: LLM_MODEL, else gpt-4o; rules-v1 for the rules backend)");
    sub->add_option("--max-inflight", f.max_inflight, "Participants annotated concurrently (default: 4)")
        ->check(CLI::PositiveNumber);
    sub->add_option("--context-window", f.context_window, "Neighbouring actions shown per classification (default: 2)");
    sub->add_option("--fuzzy-threshold", f.fuzzy_threshold, "Minimum label similarity for a fuzzy catalog match (default: 0.84)")
        ->check(CLI::Range(0.0, 1.0));
    sub->add_flag("--strict", f.strict, "Exit 2 when any participant fails annotation");
}

void add_metrics(CLI::App* sub, Flags& f) {
    sub->add_option("--stage-boundaries", f.stage_boundaries,
                    "Comma-separated timestamps splitting the exercise into stages (default: equal-width bins)");
    sub->add_option("--bins", f.bins, "Equal-width time bins when no stage boundaries are given (default: 8)")
        ->check(CLI::PositiveNumber);
}

void add_analysis(CLI::App* sub, Flags& f, bool with_inputs) {
    sub->add_option("--alpha", f.alpha, "Significance level for intervals (default: 0.05)")
        ->check(CLI::Range(1e-12, 0.999999));
    if (with_inputs) {
        sub->add_option("--metrics", f.metrics, "Metrics CSV (default: <out>/metrics.csv)");
        sub->add_option("--psychometrics", f.psychometrics, "Psychometrics CSV (default: <out>/psychometrics.csv)");
        sub->add_flag("--allow-partial", f.allow_partial, "Drop participants missing from either table");
    }
}

bool given(CLI::App* sub, const std::string& name) {
    auto* opt = sub->get_option_no_throw(name);
    return opt && opt->count() > 0;
}

const std::set<std::string>& config_keys() {
    static const std::set<std::string> keys{"out", "catalog", "notes", "psychometrics", "metrics", "cache",
                                            "backend", "model", "base_url", "max_inflight", "context_window",
                                            "fuzzy_threshold", "alpha", "strict", "allow_partial",
                                            "stage_boundaries", "bins", "window_start", "window_end"};
    return keys;
}

// Defaults, then config file, then environment, then flags.
Settings resolve(CLI::App* sub, const Flags& f) {
    Settings s;
    if (!f.config.empty()) {
        json doc;
        try {
            doc = json::parse(read_text_file(f.config));
        } catch (const json::exception& e) {
            throw ConfigError("config file " + f.config + ": " + e.what());
        }
        if (!doc.is_object()) throw ConfigError("config file " + f.config + " must hold a JSON object");
        try {
            for (const auto& [key, value] : doc.items()) {
                if (!config_keys().count(key)) throw ConfigError("config file " + f.config + ": unknown key '" + key + "'");
            }
            auto str = [&](const char* key, auto& target) {
                if (doc.contains(key)) target = doc.at(key).get<std::string>();
            };
            str("out", s.out);
            str("catalog", s.catalog);
            str("notes", s.notes);
            str("psychometrics", s.psychometrics);
            str("metrics", s.metrics);
            str("cache", s.cache);
            str("backend", s.backend);
            str("model", s.model);
            str("base_url", s.base_url);
            str("window_start", s.window_start);
            str("window_end", s.window_end);
            if (doc.contains("max_inflight")) s.max_inflight = doc.at("max_inflight").get<std::size_t>();
            if (doc.contains("context_window")) s.context_window = doc.at("context_window").get<std::size_t>();
            if (doc.contains("bins")) s.bins = doc.at("bins").get<std::size_t>();
            if (doc.contains("fuzzy_threshold")) s.fuzzy_threshold = doc.at("fuzzy_threshold").get<double>();
            if (doc.contains("alpha")) s.alpha = doc.at("alpha").get<double>();
            if (doc.contains("strict")) s.strict = doc.at("strict").get<bool>();
            if (doc.contains("allow_partial")) s.allow_partial = doc.at("allow_partial").get<bool>();
            if (doc.contains("stage_boundaries")) {
                s.stage_boundaries = doc.at("stage_boundaries").get<std::vector<std::string>>();
            }
        } catch (const json::exception& e) {
            throw ConfigError("config file " + f.config + ": " + e.what());
        }
        // relative paths in the file are relative to the file
        const fs::path base = fs::path(f.config).parent_path();
        for (fs::path* p : {&s.out, &s.notes, &s.psychometrics, &s.metrics, &s.cache}) {
            if (!p->empty() && p->is_relative()) *p = base / *p;
        }
        if (doc.contains("catalog") && s.catalog.is_relative()) s.catalog = base / s.catalog;
    }

    const ApiConfig env = api_config_from_env({s.base_url, s.model, ""});
    s.base_url = env.base_url;
    s.model_from_env = env.model != s.model;
    s.model = env.model;
    s.api_key = env.api_key;

    if (given(sub, "--out")) s.out = f.out;
    if (given(sub, "--catalog")) s.catalog = f.catalog;
    if (given(sub, "--notes")) s.notes = f.notes;
    if (given(sub, "--psychometrics")) s.psychometrics = f.psychometrics;
    if (given(sub, "--metrics")) s.metrics = f.metrics;
    if (given(sub, "--cache")) s.cache = f.cache;
    if (given(sub, "--backend")) s.backend = f.backend;
    if (given(sub, "--model")) {
        s.model = f.model;
        s.model_from_env = false;
    }
    if (given(sub, "--max-inflight")) s.max_inflight = f.max_inflight;
    if (given(sub, "--context-window")) s.context_window = f.context_window;
    if (given(sub, "--fuzzy-threshold")) s.fuzzy_threshold = f.fuzzy_threshold;
    if (given(sub, "--alpha")) s.alpha = f.alpha;
    if (given(sub, "--strict")) s.strict = f.strict;
    if (given(sub, "--allow-partial")) s.allow_partial = f.allow_partial;
    if (given(sub, "--bins")) s.bins = f.bins;
    if (given(sub, "--window-start")) s.window_start = f.window_start;
    if (given(sub, "--window-end")) s.window_end = f.window_end;
    if (given(sub, "--stage-boundaries")) {
        s.stage_boundaries.clear();
        std::size_t start = 0;
        while (start <= f.stage_boundaries.size()) {
            auto end = f.stage_boundaries.find(',', start);
            if (end == std::string::npos) end = f.stage_boundaries.size();
            s.stage_boundaries.push_back(f.stage_boundaries.substr(start, end - start));
            start = end + 1;
        }
    }

    if (s.backend != "api" && s.backend != "rules" && s.backend != "replay") {
        throw ConfigError("unknown backend '" + s.backend + "' (expected api, rules or replay)");
    }
    if (s.max_inflight == 0) throw ConfigError("max_inflight must be at least 1");
    if (s.bins == 0) throw ConfigError("bins must be at least 1");
    if (!(s.alpha > 0.0 && s.alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    if (!(s.fuzzy_threshold >= 0.0 && s.fuzzy_threshold <= 1.0)) throw ConfigError("fuzzy_threshold must lie in [0, 1]");
    return s;
}

void require_file(const fs::path& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " path is required");
    if (!fs::is_regular_file(path)) throw ConfigError(what + " not found: " + path.string());
}

void require_dir(const fs::path& path, const std::string& what) {
    if (path.empty()) throw ConfigError(what + " path is required");
    if (!fs::is_directory(path)) throw ConfigError(what + " not found: " + path.string());
}

Timestamp parse_time(const std::string& text, const std::string& what) {
    auto ts = Timestamp::parse(text);
    if (!ts) throw ConfigError(what + ": invalid timestamp '" + text + "'");
    return *ts;
}

Catalog load_catalog(const Settings& s) {
    require_file(s.catalog, "catalog");
    Catalog catalog = Catalog::load(s.catalog);
    catalog.set_fuzzy_threshold(s.fuzzy_threshold);
    return catalog;
}

Corpus read_corpus(const Settings& s) {
    const fs::path path = s.out / kCorpusFile;
    require_file(path, "corpus snapshot (run the ingest stage first)");
    return corpus_from_json(read_text_file(path), path.string());
}

std::shared_ptr<ModelBackend> make_backend(const Settings& s) {
    if (s.backend == "replay") {
        if (s.cache.empty()) throw ConfigError("the replay backend needs --cache");
        require_dir(s.cache, "cache directory");
        const std::string model = s.model.empty() ? ApiConfig{}.model : s.model;
        return std::make_shared<CachingBackend>(ResponseCache(s.cache), model);
    }
    std::shared_ptr<ModelBackend> inner;
    if (s.backend == "rules") {
        if (!s.model.empty() && !s.model_from_env && s.model != kRuleModelId) {
            throw ConfigError("the rules backend only serves model " + std::string(kRuleModelId));
        }
        inner = make_rule_backend();
    } else {
        ApiConfig api;
        if (!s.base_url.empty()) api.base_url = s.base_url;
        if (!s.model.empty()) api.model = s.model;
        api.api_key = s.api_key;
        if (api.api_key.empty()) throw ConfigError("the api backend needs LLM_API_KEY");
        inner = std::make_shared<ChatCompletionBackend>(api, make_http_transport());
    }
    if (s.cache.empty()) return inner;
    return std::make_shared<CachingBackend>(ResponseCache(s.cache), inner);
}

// --- stages ----------------------------------------------------------------------

int stage_ingest(const Settings& s, std::ostream& out, std::ostream& err) {
    require_dir(s.notes, "notes directory");
    require_file(s.psychometrics, "psychometrics file");
    OpNoteOptions options;
    if (!s.window_start.empty() || !s.window_end.empty()) {
        if (s.window_start.empty() || s.window_end.empty()) {
            throw ConfigError("--window-start and --window-end must be given together");
        }
        options.exercise_window = TimeWindow{parse_time(s.window_start, "window start"),
                                             parse_time(s.window_end, "window end")};
    }
    const Corpus corpus = load_corpus(s.notes, s.psychometrics, s.allow_partial, options);
    for (const auto& w : corpus.warnings) err << "warning: " << w << "\n";
    std::vector<Participant> participants;
    for (const auto& r : corpus.records) participants.push_back(r.participant);
    write_file_atomic(s.out / kCorpusFile, corpus_to_json(corpus));
    write_file_atomic(s.out / kPsychometricsFile, format_psychometrics(participants));
    out << "ingest: " << corpus.records.size() << " participants\n";
    return kOk;
}

int stage_annotate(const Settings& s, std::ostream& out, std::ostream& err) {
    const Corpus corpus = read_corpus(s);
    const Catalog catalog = load_catalog(s);
    auto backend = make_backend(s);
    const AnnotatedCorpus annotated =
        run_pipeline(corpus, catalog, *backend, PipelineConfig{s.context_window, s.max_inflight});
    write_file_atomic(s.out / kAnnotationsFile, annotations_to_jsonl(annotated.actions));
    write_file_atomic(s.out / kFailuresFile, failures_to_jsonl(annotated.failures));
    for (const auto& f : annotated.failures) {
        err << (s.strict ? "error: " : "warning: ") << "participant " << f.participant_id << " failed at "
            << f.stage << " (" << to_string(f.kind) << "): " << f.message << "\n";
    }
    out << "annotate: " << annotated.participants.size() << " participants, " << annotated.actions.size()
        << " actions, " << annotated.failures.size() << " failures\n";
    if (s.strict && !annotated.failures.empty()) return kPipelineFailure;
    return kOk;
}

BinSpec bin_spec(const Settings& s) {
    if (s.stage_boundaries.empty()) return BinSpec::equal_width(s.bins);
    std::vector<Timestamp> boundaries;
    for (const auto& b : s.stage_boundaries) boundaries.push_back(parse_time(b, "stage boundary"));
    try {
        return BinSpec::stages(std::move(boundaries));
    } catch (const ArgumentError& e) {
        throw ConfigError(e.what());
    }
}

int stage_metrics(const Settings& s, std::ostream& out, std::ostream&) {
    const Corpus corpus = read_corpus(s);
    const fs::path annotations_path = s.out / kAnnotationsFile;
    require_file(annotations_path, "annotations (run the annotate stage first)");
    const auto actions = annotations_from_jsonl(read_text_file(annotations_path), annotations_path.string());
    std::set<std::string> failed;
    const fs::path failures_path = s.out / kFailuresFile;
    if (fs::exists(failures_path)) {
        for (const auto& f : failures_from_jsonl(read_text_file(failures_path), failures_path.string())) {
            failed.insert(f.participant_id);
        }
    }
    std::vector<std::string> ids;
    for (const auto& r : corpus.records) {
        if (!failed.count(r.participant.participant_id)) ids.push_back(r.participant.participant_id);
    }
    if (ids.empty()) throw ArgumentError("no successfully annotated participants to measure");
    const BinSpec bins = bin_spec(s);
    const auto metrics = corpus_metrics(ids, actions, bins);
    const auto dist = corpus_distribution(metrics);
    write_file_atomic(s.out / kMetricsFile, metrics_to_csv(metrics));
    write_file_atomic(s.out / kDistributionFile, distribution_to_json(dist, bins.bin_labels()));
    out << "metrics: " << metrics.size() << " participants, " << dist.grand_total << " persistence occurrences\n";
    return kOk;
}

int stage_analyze(const Settings& s, std::ostream& out, std::ostream&) {
    const fs::path metrics_path = s.metrics.empty() ? s.out / kMetricsFile : s.metrics;
    const fs::path psych_path = s.psychometrics.empty() ? s.out / kPsychometricsFile : s.psychometrics;
    require_file(metrics_path, "metrics file");
    require_file(psych_path, "psychometrics file");
    const Catalog catalog = load_catalog(s);
    const auto metrics = metrics_from_csv(read_text_file(metrics_path), catalog, metrics_path.string());
    const auto participants = parse_psychometrics(psych_path);
    const auto analysis = analyze(join_observations(metrics, participants, s.allow_partial), s.alpha);
    write_file_atomic(s.out / kAnalysisFile, analysis_to_json(analysis));
    const fs::path report = s.out / kReportDir;
    write_file_atomic(report / "table1.csv", table1_csv(analysis.correlations));
    write_file_atomic(report / "table2.csv", table2_csv(analysis.regression));
    write_file_atomic(report / "tables.json", tables_json(analysis));
    out << "analyze: n = " << analysis.observations.size() << "\n";
    return kOk;
}

AnalysisResult read_analysis(const Settings& s) {
    const fs::path path = s.out / kAnalysisFile;
    require_file(path, "analysis (run the analyze stage first)");
    return analysis_from_json(read_text_file(path), path.string());
}

CorpusDistribution read_distribution(const Settings& s) {
    const fs::path path = s.out / kDistributionFile;
    require_file(path, "distribution (run the metrics stage first)");
    return distribution_from_json(read_text_file(path), path.string());
}

int stage_report(const Settings& s, std::ostream& out, std::ostream& err) {
    const auto analysis = read_analysis(s);
    const auto dist = read_distribution(s);
    for (const auto& w : write_report(s.out / kReportDir, analysis, dist)) err << "warning: " << w << "\n";
    out << "report: " << (s.out / kReportDir).string() << "\n";
    return kOk;
}

void print_summary(const Settings& s, std::ostream& out) {
    const auto analysis = read_analysis(s);
    const auto dist = read_distribution(s);
    out << "\nparticipants:             " << dist.participant_counts.size() << "\n";
    out << "persistence occurrences:  " << dist.grand_total << " (mean " << fixed(dist.participant_summary.mean, 2)
        << " per participant)\n";
    out << "top techniques:\n";
    const auto ranked = ranked_totals(dist);
    for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) {
        out << "  " << ranked[i].first << "  " << ranked[i].second << " ("
            << format_percent(dist.percentages.at(ranked[i].first)) << ")\n";
    }
    for (const auto& c : analysis.correlations) {
        if (c.name != "LA_GriPS") continue;
        out << "GRiPS correlation:        r = " << fixed(c.result.r, 3) << ", p = " << fixed(c.result.p_value, 3)
            << ", CI [" << fixed(c.result.ci_lower, 3) << ", " << fixed(c.result.ci_upper, 3) << "]\n";
    }
}

int stage_run(const Settings& s, std::ostream& out, std::ostream& err) {
    for (auto stage : {stage_ingest, stage_annotate, stage_metrics, stage_analyze, stage_report}) {
        const int code = stage(s, out, err);
        if (code != kOk) return code;
    }
    print_summary(s, out);
    return kOk;
}

int stage_synth(const SynthFlags& f, std::ostream& out) {
    Settings defaults;
    const fs::path catalog_path = f.catalog.empty() ? defaults.catalog : fs::path(f.catalog);
    require_file(catalog_path, "catalog");
    const Catalog catalog = Catalog::load(catalog_path);
    const SynthCorpus corpus = generate(f.config, catalog);
    write_synth(f.out, corpus);
    out << "synth: " << corpus.participants.size() << " participants, " << corpus.ground_truth.size()
        << " persistence entries -> " << f.out << "\n";
    return kOk;
}

int exit_code_for(const std::exception& e, std::ostream& err) {
    if (auto* d = dynamic_cast<const DegenerateInputError*>(&e)) {
        err << "error: statistical degeneracy in column '" << d->column() << "': " << e.what() << "\n";
        return kDegenerate;
    }
    if (dynamic_cast<const InsufficientDataError*>(&e)) {
        err << "error: " << e.what() << "\n";
        return kDegenerate;
    }
    err << "error: " << e.what() << "\n";
    return kUsage;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Loss-aversion analysis of red-team operator notes: ingest, annotate, measure, analyze, report."};
    app.name(args.empty() ? "persistlens" : fs::path(args.front()).filename().string());
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every subcommand");

    Flags flags;
    SynthFlags synth;

    auto* ingest = app.add_subcommand("ingest", "Parse OPNOTE files and the psychometrics table into <out>/corpus.json");
    add_common(ingest, flags);
    add_ingest(ingest, flags);

    auto* annotate = app.add_subcommand("annotate", "Segment and classify actions into <out>/annotations.jsonl");
    add_common(annotate, flags);
    add_annotate(annotate, flags);

    auto* metrics = app.add_subcommand("metrics", "Per-participant metrics and corpus distribution");
    add_common(metrics, flags);
    add_metrics(metrics, flags);

    auto* analyze_cmd = app.add_subcommand("analyze", "Correlations and regression into <out>/analysis.json and tables");
    add_common(analyze_cmd, flags);
    add_analysis(analyze_cmd, flags, true);

    auto* report = app.add_subcommand("report", "Tables and figures into <out>/report");
    add_common(report, flags);

    auto* run_cmd = app.add_subcommand("run", "All stages: ingest, annotate, metrics, analyze, report");
    add_common(run_cmd, flags);
    add_ingest(run_cmd, flags);
    add_annotate(run_cmd, flags);
    add_metrics(run_cmd, flags);
    add_analysis(run_cmd, flags, false);

    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with a planted effect");
    auto& sc = synth.config;
    synth_cmd->add_option("--out", synth.out, "Output directory")->capture_default_str();
    synth_cmd->add_option("--catalog", synth.catalog, "ATT&CK persistence catalog JSON (default: bundled catalog)");
    synth_cmd->add_option("--n", sc.n_participants, "Participants")->capture_default_str()->check(CLI::PositiveNumber);
    synth_cmd->add_option("--seed", sc.seed, "Random seed")->capture_default_str();
    synth_cmd->add_option("--grips-slope", sc.grips_slope, "Persistence actions per GRiPS point")->capture_default_str();
    synth_cmd->add_option("--division-effect", sc.division_effect, "Extra actions for Open division")->capture_default_str();
    synth_cmd->add_option("--noise-sd", sc.noise_sd, "Gaussian noise sd")->capture_default_str();
    synth_cmd->add_option("--intercept", sc.intercept, "Count model intercept")->capture_default_str();
    synth_cmd->add_option("--technique", sc.techniques, "Catalog technique to sample (repeatable; default: all with rules)");
    synth_cmd->add_option("--min-filler", sc.min_filler_entries, "Fewest filler entries per participant")->capture_default_str();
    synth_cmd->add_option("--max-filler", sc.max_filler_entries, "Most filler entries per participant")->capture_default_str();

    std::vector<std::string> argv_tail(args.size() > 1 ? args.begin() + 1 : args.end(), args.end());
    std::reverse(argv_tail.begin(), argv_tail.end());
    try {
        app.parse(argv_tail);
    } catch (const CLI::CallForHelp&) {
        const auto subs = app.get_subcommands();
        out << (subs.empty() ? app.help() : subs.front()->help());
        return kOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
            err << "run '" << app.get_name() << " " << sub->get_name() << " --help' for usage\n";
        }
        return kUsage;
    }

    try {
        if (synth_cmd->parsed()) return stage_synth(synth, out);
        CLI::App* sub = app.get_subcommands().front();
        const Settings s = resolve(sub, flags);
        if (sub == ingest) return stage_ingest(s, out, err);
        if (sub == annotate) return stage_annotate(s, out, err);
        if (sub == metrics) return stage_metrics(s, out, err);
        if (sub == analyze_cmd) return stage_analyze(s, out, err);
        if (sub == report) return stage_report(s, out, err);
        return stage_run(s, out, err);
    } catch (const std::exception& e) {
        return exit_code_for(e, err);
    }
}

}  // namespace persistlens::cli
