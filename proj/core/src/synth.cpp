#include "persistlens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "json.hpp"
#include "persistlens/error.hpp"
#include "persistlens/fileio.hpp"
#include "persistlens/rules.hpp"

namespace persistlens {

using ojson = nlohmann::ordered_json;

SynthRng::SynthRng(std::uint64_t seed) : engine_(seed) {}

double SynthRng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double SynthRng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::size_t SynthRng::below(std::size_t n) {
    if (n == 0) throw ArgumentError("SynthRng::below(0)");
    return std::min(static_cast<std::size_t>(uniform() * static_cast<double>(n)), n - 1);
}

double SynthRng::normal(double mean, double sd) {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return mean + sd * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

const std::vector<std::string>& filler_texts() {
    static const std::vector<std::string> texts = {
        "ran an nmap sweep of 10.20.0.0/16 looking for smb hosts",
        "enumerated domain trusts with nltest",
        "kerberoasted the sql principal and queued the hash for cracking",
        "dumped lsass on ws-114 with a comsvcs minidump",
        "pivoted to the finance subnet through the jump host",
        "took screenshots of the hr share listing",
        "uploaded the staged archive to the drop server over https",
        "compressed the engineering share into a split 7z archive",
        "queried ldap for members of the it support group",
        "checked which hosts have smb signing disabled",
        "sprayed one password against owa, two hits",
        "read through the internal wiki for network diagrams",
        "escalated to system on ws-114 via the print spooler bug",
        "moved laterally to fs-02 with psexec",
        "exfiltrated the customer database export over dns",
        "maintenance alert received, paused activity for twenty minutes",
        "reviewed beacon logs, nothing new",
        "mapped the dmz firewall rules from the config backup",
        "copied gpo backups off sysvol for offline review",
        "tested egress on ports 53, 80 and 443",
    };
    return texts;
}

namespace {

struct TechniquePlan {
    TechniqueRef ref;
    const KeywordRule* rule = nullptr;
};

const KeywordRule* rule_for(const std::string& display_name) {
    for (const auto& r : persistence_rules()) {
        if (r.label == display_name) return &r;
    }
    return nullptr;
}

std::vector<TechniquePlan> resolve_techniques(const SynthConfig& config, const Catalog& catalog) {
    std::vector<std::string> names = config.techniques;
    if (names.empty()) {
        for (const auto& r : persistence_rules()) names.push_back(r.label);
    }
    std::vector<TechniquePlan> out;
    for (const auto& name : names) {
        const auto match = catalog.normalize_label(name);
        if (match.kind != MatchKind::exact || !match.ref) {
            throw ConfigError("synth technique '" + name + "' is not a catalog name");
        }
        const KeywordRule* rule = rule_for(match.ref->display_name());
        if (!rule) {
            throw ConfigError("synth technique '" + name + "' has no rule-backend trigger phrase");
        }
        out.push_back({*match.ref, rule});
    }
    return out;
}

std::string participant_name(std::size_t i, std::size_t n) {
    const std::size_t width = std::max<std::size_t>(3, std::to_string(n).size());
    std::string digits = std::to_string(i + 1);
    return "P" + std::string(width - digits.size(), '0') + digits;
}

double round2(double v) { return std::round(v * 100.0) / 100.0; }

}  // namespace

void validate(const SynthConfig& config, const Catalog& catalog) {
    if (config.n_participants < 1) throw ConfigError("n_participants must be at least 1");
    if (!(config.noise_sd >= 0.0) || !std::isfinite(config.noise_sd)) {
        throw ConfigError("noise_sd must be a non-negative finite number");
    }
    for (double v : {config.grips_slope, config.division_effect, config.intercept}) {
        if (!std::isfinite(v)) throw ConfigError("synth coefficients must be finite");
    }
    if (config.min_filler_entries > config.max_filler_entries) {
        throw ConfigError("min_filler_entries exceeds max_filler_entries");
    }
    if (config.exercise_seconds < 60) throw ConfigError("exercise window must span at least a minute");
    resolve_techniques(config, catalog);
}

SynthCorpus generate(const SynthConfig& config, const Catalog& catalog) {
    validate(config, catalog);
    const auto plans = resolve_techniques(config, catalog);
    const auto& fillers = filler_texts();
    SynthRng rng(config.seed);
    SynthCorpus out;

    for (std::size_t i = 0; i < config.n_participants; ++i) {
        Participant p;
        p.participant_id = participant_name(i, config.n_participants);
        p.psychometrics.grips = round2(rng.uniform(1.0, 5.0));
        p.psychometrics.admc_rc1 = round2(rng.uniform(0.0, 3.0));
        p.psychometrics.admc_rc2 = round2(rng.uniform(0.0, 3.0));
        p.division = rng.uniform() < 0.5 ? Division::Expert : Division::Open;
        const double open = p.division == Division::Open ? 1.0 : 0.0;
        const double noise = rng.normal(0.0, config.noise_sd);
        const double expected =
            config.intercept + config.grips_slope * p.psychometrics.grips + config.division_effect * open + noise;
        const auto persistence = static_cast<std::size_t>(std::llround(std::max(0.0, expected)));
        const std::size_t filler =
            config.min_filler_entries + rng.below(config.max_filler_entries - config.min_filler_entries + 1);

        // true marks a persistence entry; Fisher-Yates shuffle fixes the order
        std::vector<bool> kinds(persistence, true);
        kinds.resize(persistence + filler, false);
        for (std::size_t k = kinds.size(); k > 1; --k) {
            const std::size_t j = rng.below(k);
            const bool tmp = kinds[k - 1];
            kinds[k - 1] = kinds[j];
            kinds[j] = tmp;
        }

        OpNote note;
        note.participant_id = p.participant_id;
        const long long slot = config.exercise_seconds / static_cast<long long>(kinds.size() + 1);
        long long offset = 0;
        for (std::size_t e = 0; e < kinds.size(); ++e) {
            offset += 1 + static_cast<long long>(rng.below(static_cast<std::size_t>(std::max<long long>(slot - 1, 1))));
            const Timestamp ts(config.exercise_start.value() + std::chrono::seconds(offset));
            NoteEntry entry;
            entry.timestamp = ts;
            if (kinds[e]) {
                const auto& plan = plans[rng.below(plans.size())];
                entry.text = plan.rule->examples[rng.below(plan.rule->examples.size())];
                out.ground_truth.push_back({p.participant_id, e, ts, plan.ref.technique_id,
                                            plan.ref.subtechnique_id, plan.ref.display_name(), entry.text});
            } else {
                entry.text = fillers[rng.below(fillers.size())];
                if (rng.uniform() < 0.25) entry.text += "\n  output saved to loot/" + std::to_string(e) + ".txt";
            }
            note.entries.push_back(std::move(entry));
        }
        out.notes.push_back(std::move(note));
        out.participants.push_back(std::move(p));
    }
    return out;
}

void write_synth(const std::filesystem::path& dir, const SynthCorpus& corpus) {
    for (const auto& note : corpus.notes) {
        write_file_atomic(dir / "notes" / (note.participant_id + std::string(kOpNoteExtension)), format_opnote(note));
    }
    write_file_atomic(dir / "psychometrics.csv", format_psychometrics(corpus.participants));
    write_file_atomic(dir / "ground_truth.jsonl", ground_truth_to_jsonl(corpus.ground_truth));
}

std::string ground_truth_to_jsonl(const std::vector<GroundTruthAction>& actions) {
    std::string out;
    for (const auto& a : actions) {
        ojson j{{"participant_id", a.participant_id},
                {"entry_index", a.entry_index},
                {"timestamp", a.timestamp.to_string()},
                {"technique_id", a.technique_id},
                {"subtechnique_id", a.subtechnique_id ? ojson(*a.subtechnique_id) : ojson(nullptr)},
                {"label", a.label},
                {"text", a.text}};
        out += j.dump() + "\n";
    }
    return out;
}

std::vector<GroundTruthAction> ground_truth_from_jsonl(std::string_view text, const std::string& origin) {
    std::vector<GroundTruthAction> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = ojson::parse(line);
            GroundTruthAction a;
            a.participant_id = j.at("participant_id").get<std::string>();
            a.entry_index = j.at("entry_index").get<std::size_t>();
            auto ts = Timestamp::parse(j.at("timestamp").get<std::string>());
            if (!ts) throw ParseError(origin, line_no, 1, "bad timestamp");
            a.timestamp = *ts;
            a.technique_id = j.at("technique_id").get<std::string>();
            if (!j.at("subtechnique_id").is_null()) a.subtechnique_id = j.at("subtechnique_id").get<std::string>();
            a.label = j.at("label").get<std::string>();
            a.text = j.at("text").get<std::string>();
            out.push_back(std::move(a));
        } catch (const ojson::exception& e) {
            throw ParseError(origin, line_no, 1, e.what());
        }
    }
    return out;
}

std::map<std::string, std::size_t> ground_truth_counts(const std::vector<GroundTruthAction>& actions) {
    std::map<std::string, std::size_t> out;
    for (const auto& a : actions) ++out[a.participant_id];
    return out;
}

}  // namespace persistlens
