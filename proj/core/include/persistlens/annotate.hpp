#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "persistlens/backend.hpp"
#include "persistlens/error.hpp"
#include "persistlens/ingest.hpp"
#include "persistlens/taxonomy.hpp"
#include "persistlens/timestamp.hpp"

namespace persistlens {

inline constexpr std::string_view kPromptVersion = "persistlens-prompts/1";
inline constexpr std::string_view kSegmentationStage = "segmentation";
inline constexpr std::string_view kClassificationStage = "classification";

// Inclusive range of NoteEntry indices.
struct SourceSpan {
    std::size_t first = 0;
    std::size_t last = 0;

    friend bool operator==(const SourceSpan&, const SourceSpan&) = default;
};

struct ActionSegment {
    std::size_t action_id = 0;  // ordinal within the participant
    Timestamp start;
    Timestamp end;
    std::string description;
    SourceSpan source_span;

    friend bool operator==(const ActionSegment&, const ActionSegment&) = default;
};

struct PersistenceAnnotation {
    std::size_t action_id = 0;
    bool is_persistence = false;
    std::optional<TechniqueRef> technique;
    MatchKind match_kind = MatchKind::unmapped;
    std::string raw_label;
    std::string reasoning;
    std::string backend_id;

    friend bool operator==(const PersistenceAnnotation&, const PersistenceAnnotation&) = default;
};

struct AnnotatedAction {
    std::string participant_id;
    ActionSegment segment;
    PersistenceAnnotation annotation;
};

enum class FailureKind { transport, schema, cache_miss };

std::string_view to_string(FailureKind kind);

struct AnnotationFailure {
    std::string participant_id;
    std::string stage;
    FailureKind kind = FailureKind::schema;
    std::string message;
};

// Model output that still fails validation after the repair round-trip.
class SchemaViolation : public Error {
public:
    SchemaViolation(std::string stage, const std::string& what)
        : Error(what), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

struct PipelineConfig {
    std::size_t context_window = 2;
    std::size_t max_inflight = 4;
};

struct AnnotatedCorpus {
    std::vector<std::string> participants;  // annotated successfully, sorted
    std::vector<AnnotatedAction> actions;    // by participant_id, then action_id
    std::vector<AnnotationFailure> failures; // by participant_id
};

// --- prompts -----------------------------------------------------------------

std::string segmentation_instructions();
std::string classification_instructions(const Catalog& catalog);
std::string segmentation_schema();
std::string classification_schema();

BackendRequest segmentation_request(const OpNote& note, const std::string& model);
BackendRequest classification_request(const std::vector<ActionSegment>& segments, std::size_t index,
                                      std::size_t context_window, const std::string& instructions,
                                      const std::string& model);
// Re-asks with the invalid output and the validation error appended.
BackendRequest repair_request(const BackendRequest& original, const std::string& bad_output,
                              const std::string& error);

// Validators throw SchemaViolation describing the first problem found.
std::vector<ActionSegment> parse_segmentation_response(std::string_view text, const OpNote& note);

struct ClassificationReply {
    std::string reasoning;
    bool is_persistence = false;
    std::string technique_label;
};
ClassificationReply parse_classification_response(std::string_view text);

// --- stages ------------------------------------------------------------------

// Throws ArgumentError on an empty note, TransportError/CacheMissError from the
// backend, SchemaViolation after a failed repair.
std::vector<ActionSegment> segment(const OpNote& note, ModelBackend& backend);

std::vector<PersistenceAnnotation> classify(const std::vector<ActionSegment>& segments,
                                            const OpNote& note, const Catalog& catalog,
                                            ModelBackend& backend, std::size_t context_window);

// Participants are processed concurrently on max_inflight workers; the result
// is ordered independently of completion order. Notes without entries yield
// no actions.
AnnotatedCorpus run_pipeline(const Corpus& corpus, const Catalog& catalog, ModelBackend& backend,
                             const PipelineConfig& config);

// Fraction of persistence annotations that carry a mapped technique (1.0 if none).
double annotation_coverage(const std::vector<AnnotatedAction>& actions);

// --- serialization -------------------------------------------------------------

std::string annotations_to_jsonl(const std::vector<AnnotatedAction>& actions);
std::vector<AnnotatedAction> annotations_from_jsonl(std::string_view text,
                                                    const std::string& origin = "");
std::string failures_to_jsonl(const std::vector<AnnotationFailure>& failures);
std::vector<AnnotationFailure> failures_from_jsonl(std::string_view text,
                                                   const std::string& origin = "");

}  // namespace persistlens
