#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "persistlens/ingest.hpp"
#include "persistlens/metrics.hpp"
#include "persistlens/stats.hpp"

namespace persistlens {

struct NamedCorrelation {
    std::string name;  // "LA_GriPS", "LA_ADMC_RC1", "LA_ADMC_RC2"
    CorrelationResult result;
};

// One joined observation: a participant's persistence count and traits.
struct Observation {
    std::string participant_id;
    Division division = Division::Expert;
    PsychometricProfile psychometrics;
    double persistence_count = 0.0;
};

struct AnalysisResult {
    std::vector<Observation> observations;  // sorted by participant_id
    std::vector<NamedCorrelation> correlations;
    RegressionResult regression;
};

inline constexpr std::string_view kGripsTerm = "GRiPS Score";
inline constexpr std::string_view kRc1Term = "ADMC RC1 Score";
inline constexpr std::string_view kRc2Term = "ADMC RC2 Score";
inline constexpr std::string_view kDivisionTerm = "Division (Open)";

// Expert = 0 (reference level), Open = 1.
double division_indicator(Division d);

// Joins metrics to psychometrics by participant id. Orphans on either side
// raise JoinError unless allow_partial.
std::vector<Observation> join_observations(const std::vector<BehavioralMetrics>& metrics,
                                           const std::vector<Participant>& participants,
                                           bool allow_partial = false);

// Pearson correlations of persistence count with GRiPS, RC1 and RC2, and the
// regression of persistence count on RC1 + RC2 + GRiPS + Division (Open).
// Raises InsufficientDataError when n <= 5 (the regression's parameter count)
// and DegenerateInputError / SingularDesignError naming a constant column.
AnalysisResult analyze(std::vector<Observation> observations, double alpha = 0.05);

std::string analysis_to_json(const AnalysisResult& analysis);
AnalysisResult analysis_from_json(std::string_view text, const std::string& origin = "");

}  // namespace persistlens
