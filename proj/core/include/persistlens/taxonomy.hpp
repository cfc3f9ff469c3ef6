#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace persistlens {

inline constexpr std::string_view kPersistenceTactic = "persistence";
inline constexpr double kDefaultFuzzyThreshold = 0.84;

// One catalog entry: a technique, or one of its sub-techniques.
struct TechniqueRef {
    std::string technique_id;
    std::string name;
    std::optional<std::string> subtechnique_id;
    std::optional<std::string> subtechnique_name;
    std::string tactic;

    // "Valid Accounts" or "Valid Accounts: Cloud Accounts".
    std::string display_name() const;
    // Sub-technique id when present, else the technique id.
    const std::string& most_specific_id() const;

    friend bool operator==(const TechniqueRef&, const TechniqueRef&) = default;
};

enum class MatchKind { exact, alias, fuzzy, unmapped };

std::string_view to_string(MatchKind kind);
std::optional<MatchKind> match_kind_from_string(std::string_view text);

struct MatchResult {
    MatchKind kind = MatchKind::unmapped;
    std::optional<TechniqueRef> ref;
    double similarity = 0.0;  // 1.0 for exact/alias; best score seen for fuzzy/unmapped
};

// Lowercase, punctuation removed, whitespace runs collapsed to one space, trimmed.
// This is the key space of the alias index.
std::string normalize_key(std::string_view text);

// Optimal string alignment (restricted Damerau-Levenshtein) distance over bytes.
std::size_t damerau_levenshtein(std::string_view a, std::string_view b);

// 1 - distance / max(len). Two empty strings are identical (1.0).
double dl_similarity(std::string_view a, std::string_view b);

// Immutable after load; safe to share across threads.
class Catalog {
public:
    struct LoadReport {
        std::size_t techniques_kept = 0;
        std::size_t techniques_excluded = 0;  // not in the persistence tactic
    };

    static Catalog load(const std::filesystem::path& path, LoadReport* report = nullptr);
    static Catalog parse(std::string_view json_text, const std::string& origin = "<memory>",
                         LoadReport* report = nullptr);

    const std::vector<TechniqueRef>& entries() const noexcept { return entries_; }
    const std::string& source_version() const noexcept { return source_version_; }
    std::size_t size() const noexcept { return entries_.size(); }

    // Technique-level entry (no sub-technique) for an id, if loaded.
    const TechniqueRef* find_technique(std::string_view technique_id) const;
    const TechniqueRef* find_by_id(std::string_view id) const;
    // Technique-level names, sorted.
    std::vector<std::string> technique_names() const;

    MatchResult normalize_label(std::string_view label) const;

    double fuzzy_threshold() const noexcept { return fuzzy_threshold_; }
    void set_fuzzy_threshold(double threshold);

    // normalized key -> entry indices, sorted by (technique_id, subtechnique_id)
    using Index = std::map<std::string, std::vector<std::size_t>, std::less<>>;
    const Index& name_index() const noexcept { return name_index_; }
    const Index& alias_index() const noexcept { return alias_index_; }

private:
    void add_key(Index& index, const std::string& raw, std::size_t entry);
    void finish_indexes();

    std::vector<TechniqueRef> entries_;
    std::string source_version_;
    Index name_index_;   // canonical names, ids and "Technique: Sub" composites
    Index alias_index_;  // catalog-declared aliases
    std::map<std::string, std::size_t, std::less<>> id_index_;
    double fuzzy_threshold_ = kDefaultFuzzyThreshold;
};

}  // namespace persistlens
