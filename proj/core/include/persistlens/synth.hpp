#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "persistlens/ingest.hpp"
#include "persistlens/taxonomy.hpp"
#include "persistlens/timestamp.hpp"

namespace persistlens {

// Persistence count per participant:
//   round(max(0, intercept + grips_slope * grips + division_effect * [Open] + N(0, noise_sd)))
struct SynthConfig {
    std::size_t n_participants = 20;
    std::uint64_t seed = 1;
    double grips_slope = -4.4;
    double division_effect = 0.0;
    double noise_sd = 4.0;
    double intercept = 25.0;
    // Catalog names ("Technique" or "Technique: Sub"); empty means every name
    // the rule table can trigger.
    std::vector<std::string> techniques;
    // Filler (non-persistence) entries per participant, drawn uniformly.
    std::size_t min_filler_entries = 5;
    std::size_t max_filler_entries = 15;
    Timestamp exercise_start = Timestamp::from_fields(2024, 3, 4, 9, 0, 0);
    long long exercise_seconds = 2 * 24 * 3600;
};

// Throws ConfigError on any invalid field or a technique the catalog or the
// rule table cannot resolve.
void validate(const SynthConfig& config, const Catalog& catalog);

struct GroundTruthAction {
    std::string participant_id;
    std::size_t entry_index = 0;  // position in the participant's note
    Timestamp timestamp;
    std::string technique_id;
    std::optional<std::string> subtechnique_id;
    std::string label;  // catalog display name
    std::string text;

    friend bool operator==(const GroundTruthAction&, const GroundTruthAction&) = default;
};

struct SynthCorpus {
    std::vector<OpNote> notes;               // by participant id
    std::vector<Participant> participants;   // by participant id
    std::vector<GroundTruthAction> ground_truth;
};

// Same config and seed always give the same corpus. Draw order per participant:
// GRiPS, RC1, RC2, division, noise, filler count, entry order, entry texts, gaps.
SynthCorpus generate(const SynthConfig& config, const Catalog& catalog);

// <dir>/notes/<id>.opnote, <dir>/psychometrics.csv, <dir>/ground_truth.jsonl
void write_synth(const std::filesystem::path& dir, const SynthCorpus& corpus);

std::string ground_truth_to_jsonl(const std::vector<GroundTruthAction>& actions);
std::vector<GroundTruthAction> ground_truth_from_jsonl(std::string_view text, const std::string& origin = "");

// Persistence count per participant; participants absent from `actions` are not listed.
std::map<std::string, std::size_t> ground_truth_counts(const std::vector<GroundTruthAction>& actions);

// Entry texts the rule table classifies as non-persistence.
const std::vector<std::string>& filler_texts();

// The engine output is fixed by the standard; the transforms below are written
// out so draws do not depend on the library's distribution implementations.
class SynthRng {
public:
    explicit SynthRng(std::uint64_t seed);

    double uniform();                            // [0, 1), 53 random bits
    double uniform(double lo, double hi);        // [lo, hi)
    std::size_t below(std::size_t n);            // [0, n)
    double normal(double mean, double sd);       // Box-Muller, one value per call

private:
    std::mt19937_64 engine_;
};

}  // namespace persistlens
