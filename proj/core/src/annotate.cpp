#include "persistlens/annotate.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <thread>

#include "json.hpp"

namespace persistlens {

using ojson = nlohmann::ordered_json;

std::string_view to_string(FailureKind kind) {
    switch (kind) {
        case FailureKind::transport: return "transport";
        case FailureKind::schema: return "schema";
        case FailureKind::cache_miss: return "cache_miss";
    }
    return "schema";
}

// --- prompts -----------------------------------------------------------------

std::string segmentation_instructions() {
    return std::string(kPromptVersion) + " segmentation\n"
           "You read a red-team operator's timestamped operational notes and rebuild the "
           "sequence of discrete actions they carried out.\n"
           "The user message is a JSON object whose \"entries\" array lists the notes in time "
           "order, each with an \"index\", a \"timestamp\" and the note \"text\".\n"
           "Group consecutive entries that describe one task into a single action. Every action "
           "starts at entry \"start_entry\" and ends at entry \"end_entry\" (inclusive, "
           "start_entry <= end_entry). Actions must be listed in time order and must not share "
           "entries; entries that record no activity may be left out.\n"
           "For each action write a concise \"description\" of the task performed, in the "
           "operator's terms, one sentence.\n"
           "Answer with a single JSON object matching the response schema and nothing else.";
}

std::string classification_instructions(const Catalog& catalog) {
    std::string text = std::string(kPromptVersion) + " classification\n"
        "You decide whether one attacker action is a persistence technique: a step whose "
        "purpose is to keep access to a compromised environment across restarts, credential "
        "changes or other interruptions.\n"
        "The user message is a JSON object with the \"target\" action and the actions just "
        "before (\"context_before\") and after (\"context_after\") it. Judge the target in the "
        "light of its neighbours, but classify only the target.\n"
        "Work in this order. First write your \"reasoning\": what the action does and whether it "
        "serves to retain access. Only then give \"is_persistence\". When it is true, set "
        "\"technique_label\" to the closest entry of the catalog below, preferring the most "
        "specific sub-technique, written exactly as listed; otherwise set it to null.\n"
        "Catalog (" + catalog.source_version() + "):\n";
    for (const auto& e : catalog.entries()) {
        text += "- " + e.most_specific_id() + " " + e.display_name() + "\n";
    }
    text += "Answer with a single JSON object matching the response schema and nothing else.";
    return text;
}

std::string segmentation_schema() {
    ojson item;
    item["type"] = "object";
    item["properties"] = ojson{{"start_entry", ojson{{"type", "integer"}}},
                               {"end_entry", ojson{{"type", "integer"}}},
                               {"description", ojson{{"type", "string"}}}};
    item["required"] = {"start_entry", "end_entry", "description"};
    item["additionalProperties"] = false;
    ojson schema;
    schema["type"] = "object";
    schema["properties"] = ojson{{"actions", ojson{{"type", "array"}, {"items", item}}}};
    schema["required"] = {"actions"};
    schema["additionalProperties"] = false;
    return schema.dump();
}

std::string classification_schema() {
    ojson schema;
    schema["type"] = "object";
    // Field order is significant: reasoning precedes every label field.
    schema["properties"] = ojson{
        {"reasoning", ojson{{"type", "string"},
                            {"description", "Step-by-step justification, written before any label."}}},
        {"is_persistence", ojson{{"type", "boolean"}}},
        {"technique_label", ojson{{"type", {"string", "null"}}}},
    };
    schema["required"] = {"reasoning", "is_persistence", "technique_label"};
    schema["additionalProperties"] = false;
    return schema.dump();
}

namespace {

ojson action_json(const ActionSegment& s) {
    return ojson{{"action_id", s.action_id},
                 {"start", s.start.to_iso()},
                 {"end", s.end.to_iso()},
                 {"description", s.description}};
}

}  // namespace

BackendRequest segmentation_request(const OpNote& note, const std::string& model) {
    ojson payload;
    payload["entries"] = ojson::array();
    for (std::size_t i = 0; i < note.entries.size(); ++i) {
        const auto& e = note.entries[i];
        payload["entries"].push_back(
            ojson{{"index", i}, {"timestamp", e.timestamp.to_iso()}, {"text", e.text}});
    }
    BackendRequest r;
    r.stage = kSegmentationStage;
    r.model = model;
    r.system_instructions = segmentation_instructions();
    r.user_payload = payload.dump(2);
    r.response_schema = segmentation_schema();
    return r;
}

BackendRequest classification_request(const std::vector<ActionSegment>& segments, std::size_t index,
                                      std::size_t context_window, const std::string& instructions,
                                      const std::string& model) {
    if (index >= segments.size()) throw ArgumentError("classification target out of range");
    ojson payload;
    payload["target"] = action_json(segments[index]);
    payload["context_before"] = ojson::array();
    payload["context_after"] = ojson::array();
    const std::size_t lo = index >= context_window ? index - context_window : 0;
    for (std::size_t i = lo; i < index; ++i) payload["context_before"].push_back(action_json(segments[i]));
    for (std::size_t i = index + 1; i < segments.size() && i <= index + context_window; ++i) {
        payload["context_after"].push_back(action_json(segments[i]));
    }
    BackendRequest r;
    r.stage = kClassificationStage;
    r.model = model;
    r.system_instructions = instructions;
    r.user_payload = payload.dump(2);
    r.response_schema = classification_schema();
    return r;
}

BackendRequest repair_request(const BackendRequest& original, const std::string& bad_output,
                              const std::string& error) {
    BackendRequest r = original;
    r.user_payload += "\n\nYour previous answer was rejected: " + error +
                      "\nPrevious answer:\n" + bad_output +
                      "\nReturn a corrected JSON object that satisfies the schema.";
    return r;
}

namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

ojson parse_object(std::string_view text, const std::string& stage) {
    ojson doc;
    try {
        doc = ojson::parse(text);
    } catch (const ojson::exception&) {
        throw SchemaViolation(stage, "response is not valid JSON");
    }
    if (!doc.is_object()) throw SchemaViolation(stage, "response must be a JSON object");
    return doc;
}

}  // namespace

std::vector<ActionSegment> parse_segmentation_response(std::string_view text, const OpNote& note) {
    const std::string stage(kSegmentationStage);
    const auto doc = parse_object(text, stage);
    if (!doc.contains("actions") || !doc.at("actions").is_array()) {
        throw SchemaViolation(stage, "missing 'actions' array");
    }
    std::vector<ActionSegment> out;
    long long previous_end = -1;
    const auto n = static_cast<long long>(note.entries.size());
    for (const auto& item : doc.at("actions")) {
        const std::string where = "actions[" + std::to_string(out.size()) + "]";
        if (!item.is_object()) throw SchemaViolation(stage, where + " is not an object");
        for (const char* key : {"start_entry", "end_entry"}) {
            if (!item.contains(key) || !item.at(key).is_number_integer()) {
                throw SchemaViolation(stage, where + "." + key + " must be an integer");
            }
        }
        if (!item.contains("description") || !item.at("description").is_string()) {
            throw SchemaViolation(stage, where + ".description must be a string");
        }
        const auto first = item.at("start_entry").get<long long>();
        const auto last = item.at("end_entry").get<long long>();
        auto description = item.at("description").get<std::string>();
        if (first < 0 || last >= n) {
            throw SchemaViolation(stage, where + " refers to an entry outside 0.." + std::to_string(n - 1));
        }
        if (first > last) throw SchemaViolation(stage, where + " has start_entry > end_entry");
        if (first <= previous_end) {
            throw SchemaViolation(stage, where + " overlaps or precedes the previous action");
        }
        if (blank(description)) throw SchemaViolation(stage, where + " has an empty description");
        previous_end = last;
        ActionSegment seg;
        seg.action_id = out.size();
        seg.source_span = {static_cast<std::size_t>(first), static_cast<std::size_t>(last)};
        seg.start = note.entries[seg.source_span.first].timestamp;
        seg.end = note.entries[seg.source_span.last].timestamp;
        seg.description = std::move(description);
        out.push_back(std::move(seg));
    }
    return out;
}

ClassificationReply parse_classification_response(std::string_view text) {
    const std::string stage(kClassificationStage);
    const auto doc = parse_object(text, stage);
    ClassificationReply reply;
    if (!doc.contains("reasoning") || !doc.at("reasoning").is_string()) {
        throw SchemaViolation(stage, "'reasoning' must be a string");
    }
    if (!doc.contains("is_persistence") || !doc.at("is_persistence").is_boolean()) {
        throw SchemaViolation(stage, "'is_persistence' must be a boolean");
    }
    if (!doc.contains("technique_label") ||
        !(doc.at("technique_label").is_string() || doc.at("technique_label").is_null())) {
        throw SchemaViolation(stage, "'technique_label' must be a string or null");
    }
    reply.reasoning = doc.at("reasoning").get<std::string>();
    reply.is_persistence = doc.at("is_persistence").get<bool>();
    if (doc.at("technique_label").is_string()) reply.technique_label = doc.at("technique_label").get<std::string>();
    if (reply.is_persistence) {
        if (blank(reply.technique_label)) {
            throw SchemaViolation(stage, "'technique_label' is required when is_persistence is true");
        }
        if (blank(reply.reasoning)) {
            throw SchemaViolation(stage, "'reasoning' is required when is_persistence is true");
        }
    }
    return reply;
}

namespace {

// One call, then one repair round-trip if validation fails.
template <typename Parse>
auto call_validated(ModelBackend& backend, const BackendRequest& request, Parse&& parse) {
    auto first = backend.complete(request);
    try {
        return parse(first.text);
    } catch (const SchemaViolation& e) {
        auto second = backend.complete(repair_request(request, first.text, e.what()));
        try {
            return parse(second.text);
        } catch (const SchemaViolation& again) {
            throw SchemaViolation(again.stage(),
                                  std::string("invalid after repair: ") + again.what());
        }
    }
}

std::string backend_label(const ModelBackend& backend) {
    return backend.backend_id() + ":" + backend.model_id();
}

}  // namespace

std::vector<ActionSegment> segment(const OpNote& note, ModelBackend& backend) {
    if (note.entries.empty()) {
        throw ArgumentError("cannot segment note of '" + note.participant_id + "': it has no entries");
    }
    const auto request = segmentation_request(note, backend.model_id());
    return call_validated(backend, request,
                          [&](const std::string& text) { return parse_segmentation_response(text, note); });
}

namespace {

std::vector<PersistenceAnnotation> classify_with(const std::vector<ActionSegment>& segments,
                                                 const Catalog& catalog, ModelBackend& backend,
                                                 std::size_t context_window,
                                                 const std::string& instructions) {
    std::vector<PersistenceAnnotation> out;
    out.reserve(segments.size());
    const auto model = backend.model_id();
    const auto label = backend_label(backend);
    for (std::size_t i = 0; i < segments.size(); ++i) {
        const auto request = classification_request(segments, i, context_window, instructions, model);
        const auto reply = call_validated(backend, request, [](const std::string& text) {
            return parse_classification_response(text);
        });
        PersistenceAnnotation a;
        a.action_id = segments[i].action_id;
        a.is_persistence = reply.is_persistence;
        a.raw_label = reply.technique_label;
        a.reasoning = reply.reasoning;
        a.backend_id = label;
        if (reply.is_persistence) {
            const auto match = catalog.normalize_label(reply.technique_label);
            a.match_kind = match.kind;
            a.technique = match.ref;
        }
        out.push_back(std::move(a));
    }
    return out;
}

}  // namespace

std::vector<PersistenceAnnotation> classify(const std::vector<ActionSegment>& segments,
                                            const OpNote& note, const Catalog& catalog,
                                            ModelBackend& backend, std::size_t context_window) {
    for (const auto& s : segments) {
        if (s.source_span.last >= note.entries.size()) {
            throw ArgumentError("segment " + std::to_string(s.action_id) + " does not belong to note of '" +
                                note.participant_id + "'");
        }
    }
    return classify_with(segments, catalog, backend, context_window,
                         classification_instructions(catalog));
}

namespace {

struct ParticipantOutcome {
    std::vector<AnnotatedAction> actions;
    std::optional<AnnotationFailure> failure;
};

ParticipantOutcome annotate_one(const ParticipantRecord& record, const Catalog& catalog,
                                ModelBackend& backend, const PipelineConfig& config,
                                const std::string& instructions) {
    ParticipantOutcome outcome;
    const auto& id = record.participant.participant_id;
    if (record.note.entries.empty()) return outcome;
    std::string stage(kSegmentationStage);
    try {
        const auto segments = segment(record.note, backend);
        stage = kClassificationStage;
        auto annotations = classify_with(segments, catalog, backend, config.context_window, instructions);
        for (std::size_t i = 0; i < segments.size(); ++i) {
            outcome.actions.push_back({id, segments[i], std::move(annotations[i])});
        }
    } catch (const SchemaViolation& e) {
        outcome.actions.clear();
        outcome.failure = AnnotationFailure{id, e.stage(), FailureKind::schema, e.what()};
    } catch (const CacheMissError& e) {
        outcome.actions.clear();
        outcome.failure = AnnotationFailure{id, stage, FailureKind::cache_miss, e.what()};
    } catch (const TransportError& e) {
        outcome.actions.clear();
        outcome.failure = AnnotationFailure{id, stage, FailureKind::transport, e.what()};
    }
    return outcome;
}

}  // namespace

AnnotatedCorpus run_pipeline(const Corpus& corpus, const Catalog& catalog, ModelBackend& backend,
                             const PipelineConfig& config) {
    const auto& records = corpus.records;
    std::vector<ParticipantOutcome> outcomes(records.size());
    const auto instructions = classification_instructions(catalog);

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < records.size(); i = next.fetch_add(1)) {
            outcomes[i] = annotate_one(records[i], catalog, backend, config, instructions);
        }
    };
    const std::size_t workers = std::clamp<std::size_t>(config.max_inflight, 1, std::max<std::size_t>(records.size(), 1));
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }

    // Assemble by participant id regardless of completion order.
    std::vector<std::size_t> order(records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return records[a].participant.participant_id < records[b].participant.participant_id;
    });
    AnnotatedCorpus result;
    for (auto i : order) {
        auto& outcome = outcomes[i];
        if (outcome.failure) {
            result.failures.push_back(std::move(*outcome.failure));
            continue;
        }
        result.participants.push_back(records[i].participant.participant_id);
        for (auto& a : outcome.actions) result.actions.push_back(std::move(a));
    }
    return result;
}

double annotation_coverage(const std::vector<AnnotatedAction>& actions) {
    std::size_t persistent = 0, mapped = 0;
    for (const auto& a : actions) {
        if (!a.annotation.is_persistence) continue;
        ++persistent;
        if (a.annotation.technique) ++mapped;
    }
    return persistent == 0 ? 1.0 : static_cast<double>(mapped) / static_cast<double>(persistent);
}

// --- serialization -------------------------------------------------------------

namespace {

ojson optional_string(const std::optional<std::string>& v) { return v ? ojson(*v) : ojson(nullptr); }

std::optional<std::string> read_optional(const ojson& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

}  // namespace

std::string annotations_to_jsonl(const std::vector<AnnotatedAction>& actions) {
    std::string out;
    for (const auto& a : actions) {
        ojson j;
        j["participant_id"] = a.participant_id;
        j["action_id"] = a.segment.action_id;
        j["start"] = a.segment.start.to_iso();
        j["end"] = a.segment.end.to_iso();
        j["description"] = a.segment.description;
        j["source_span"] = {a.segment.source_span.first, a.segment.source_span.last};
        ojson ann;
        const auto& n = a.annotation;
        ann["is_persistence"] = n.is_persistence;
        ann["reasoning"] = n.reasoning;
        ann["raw_label"] = n.raw_label;
        ann["match_kind"] = n.is_persistence ? ojson(to_string(n.match_kind)) : ojson(nullptr);
        ann["technique_id"] = n.technique ? ojson(n.technique->technique_id) : ojson(nullptr);
        ann["technique_name"] = n.technique ? ojson(n.technique->name) : ojson(nullptr);
        ann["subtechnique_id"] = n.technique ? optional_string(n.technique->subtechnique_id) : ojson(nullptr);
        ann["subtechnique_name"] = n.technique ? optional_string(n.technique->subtechnique_name) : ojson(nullptr);
        ann["backend_id"] = n.backend_id;
        j["annotation"] = std::move(ann);
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<AnnotatedAction> annotations_from_jsonl(std::string_view text, const std::string& origin) {
    std::vector<AnnotatedAction> out;
    std::size_t line_no = 0, start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (blank(line)) continue;
        try {
            const auto j = ojson::parse(line);
            AnnotatedAction a;
            a.participant_id = j.at("participant_id").get<std::string>();
            a.segment.action_id = j.at("action_id").get<std::size_t>();
            auto s = Timestamp::parse(j.at("start").get<std::string>());
            auto e = Timestamp::parse(j.at("end").get<std::string>());
            if (!s || !e) throw ParseError(origin, line_no, 0, "bad action timestamp");
            a.segment.start = *s;
            a.segment.end = *e;
            a.segment.description = j.at("description").get<std::string>();
            a.segment.source_span = {j.at("source_span").at(0).get<std::size_t>(),
                                     j.at("source_span").at(1).get<std::size_t>()};
            const auto& ann = j.at("annotation");
            auto& n = a.annotation;
            n.action_id = a.segment.action_id;
            n.is_persistence = ann.at("is_persistence").get<bool>();
            n.reasoning = ann.at("reasoning").get<std::string>();
            n.raw_label = ann.at("raw_label").get<std::string>();
            n.backend_id = ann.at("backend_id").get<std::string>();
            if (auto kind = read_optional(ann, "match_kind")) {
                auto parsed = match_kind_from_string(*kind);
                if (!parsed) throw ParseError(origin, line_no, 0, "unknown match_kind '" + *kind + "'");
                n.match_kind = *parsed;
            }
            if (auto tid = read_optional(ann, "technique_id")) {
                TechniqueRef ref;
                ref.technique_id = *tid;
                ref.name = ann.at("technique_name").get<std::string>();
                ref.subtechnique_id = read_optional(ann, "subtechnique_id");
                ref.subtechnique_name = read_optional(ann, "subtechnique_name");
                ref.tactic = std::string(kPersistenceTactic);
                n.technique = std::move(ref);
            }
            out.push_back(std::move(a));
        } catch (const ojson::exception& e) {
            throw ParseError(origin, line_no, 0, std::string("malformed annotation record: ") + e.what());
        }
    }
    return out;
}

std::string failures_to_jsonl(const std::vector<AnnotationFailure>& failures) {
    std::string out;
    for (const auto& f : failures) {
        ojson j;
        j["participant_id"] = f.participant_id;
        j["stage"] = f.stage;
        j["kind"] = to_string(f.kind);
        j["message"] = f.message;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<AnnotationFailure> failures_from_jsonl(std::string_view text, const std::string& origin) {
    std::vector<AnnotationFailure> out;
    std::size_t line_no = 0, start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(start, end - start);
        start = end + 1;
        ++line_no;
        if (blank(line)) continue;
        try {
            const auto j = ojson::parse(line);
            AnnotationFailure f;
            f.participant_id = j.at("participant_id").get<std::string>();
            f.stage = j.at("stage").get<std::string>();
            const auto kind = j.at("kind").get<std::string>();
            if (kind == "transport") {
                f.kind = FailureKind::transport;
            } else if (kind == "cache_miss") {
                f.kind = FailureKind::cache_miss;
            } else if (kind == "schema") {
                f.kind = FailureKind::schema;
            } else {
                throw ParseError(origin, line_no, 0, "unknown failure kind '" + kind + "'");
            }
            f.message = j.at("message").get<std::string>();
            out.push_back(std::move(f));
        } catch (const ojson::exception& e) {
            throw ParseError(origin, line_no, 0, std::string("malformed failure record: ") + e.what());
        }
    }
    return out;
}

}  // namespace persistlens
