#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "persistlens/annotate.hpp"
#include "persistlens/taxonomy.hpp"
#include "persistlens/timestamp.hpp"

namespace persistlens {

inline constexpr std::string_view kUnmappedBucket = "(unmapped)";
inline constexpr std::string_view kMetricsHeader =
    "participant_id,persistence_count,unique_technique_count,unmapped_count,temporal_bins,"
    "technique_counts";

// How persistence actions are bucketed in time, by action start.
//
// With stage boundaries, k boundaries give k+1 bins: (-inf, b0), [b0, b1), ...,
// [b_{k-1}, +inf). Without them, the participant's action timeline (first to
// last action start, or `window` if set) is cut into `equal_width_bins` bins,
// half-open except the last, which is closed; times outside clamp to the ends.
struct BinSpec {
    std::vector<Timestamp> boundaries;
    std::vector<std::string> labels;
    std::size_t equal_width_bins = 8;
    std::optional<TimeWindow> window;

    static BinSpec equal_width(std::size_t bins = 8, std::optional<TimeWindow> window = std::nullopt);
    // Three boundaries with the default four stage labels.
    static BinSpec stages(std::vector<Timestamp> boundaries, std::vector<std::string> labels = {});

    std::size_t bin_count() const;
    std::vector<std::string> bin_labels() const;
};

const std::vector<std::string>& default_stage_labels();

struct BehavioralMetrics {
    std::string participant_id;
    std::size_t persistence_count = 0;
    std::size_t unique_technique_count = 0;
    std::size_t unmapped_count = 0;
    std::map<std::string, std::size_t> per_technique_counts;  // technique id -> count
    std::map<std::string, std::string> technique_names;       // technique id -> name
    std::vector<std::size_t> temporal_bins;

    friend bool operator==(const BehavioralMetrics&, const BehavioralMetrics&) = default;
};

// All actions must share one participant id; `participant_id` names the
// participant when `actions` is empty and must agree with it otherwise.
BehavioralMetrics participant_metrics(std::span<const AnnotatedAction> actions, const BinSpec& bins,
                                      std::string_view participant_id = {});

// One BehavioralMetrics per listed participant, in the given order; actions of
// unlisted participants are ignored.
std::vector<BehavioralMetrics> corpus_metrics(const std::vector<std::string>& participants,
                                              const std::vector<AnnotatedAction>& actions,
                                              const BinSpec& bins);

struct ParticipantSummary {
    double mean = 0.0;
    double median = 0.0;  // linear interpolation between the central order statistics
    std::size_t min = 0;
    std::size_t max = 0;
};

struct CorpusDistribution {
    std::map<std::string, std::size_t> totals;  // technique name -> corpus-wide count
    std::size_t grand_total = 0;
    std::map<std::string, double> percentages;  // share of grand_total, in [0, 1]
    ParticipantSummary participant_summary;
    std::vector<std::size_t> participant_counts;  // persistence_count per participant, sorted
    std::vector<std::size_t> temporal_totals;      // bin-wise sum, empty if bin counts differ
};

CorpusDistribution corpus_distribution(std::span<const BehavioralMetrics> metrics);

// Combines two sub-corpus distributions as if computed over the concatenation.
CorpusDistribution merge_distributions(const CorpusDistribution& a, const CorpusDistribution& b);

// Descending by count, ties by name.
std::vector<std::pair<std::string, std::size_t>> ranked_totals(const CorpusDistribution& dist);

// 0.13983 -> "14.0%"
std::string format_percent(double share);

std::string metrics_to_csv(const std::vector<BehavioralMetrics>& metrics);
// Technique names are restored from the catalog.
std::vector<BehavioralMetrics> metrics_from_csv(std::string_view text, const Catalog& catalog,
                                                const std::string& origin = "");

std::string distribution_to_json(const CorpusDistribution& dist,
                                 const std::vector<std::string>& bin_labels = {});
CorpusDistribution distribution_from_json(std::string_view text, const std::string& origin = "");

}  // namespace persistlens
