#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "persistlens/backend.hpp"

namespace persistlens {

// One row of the rule backend's keyword table. A description matches when it
// contains any phrase (case-insensitive substring). Rows are tried in order.
struct KeywordRule {
    std::string label;  // catalog name the rule emits, "Technique" or "Technique: Sub"
    std::vector<std::string> phrases;
    std::vector<std::string> examples;  // sentences that trigger this rule and no earlier one
};

const std::vector<KeywordRule>& persistence_rules();

// Phrases explaining a negative verdict in the reasoning text. They never force
// a negative verdict on their own: persistence rules are checked first.
const std::vector<std::string>& non_persistence_phrases();

struct RuleVerdict {
    bool is_persistence = false;
    std::string label;
    std::string matched_phrase;
    std::string reasoning;
};

RuleVerdict classify_text(std::string_view description);

// First non-blank line, trimmed and capped at 200 bytes.
std::string rule_description(std::string_view entry_text);

inline constexpr std::string_view kRuleModelId = "rules-v1";

// Deterministic offline backend. Answers segmentation requests with one action
// per note entry and classification requests from the keyword table.
std::shared_ptr<ModelBackend> make_rule_backend();

}  // namespace persistlens
