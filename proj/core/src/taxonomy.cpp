#include "persistlens/taxonomy.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <tuple>

#include "json.hpp"
#include "persistlens/error.hpp"
#include "persistlens/fileio.hpp"

namespace persistlens {

using json = nlohmann::json;

std::string TechniqueRef::display_name() const {
    if (subtechnique_name) return name + ": " + *subtechnique_name;
    return name;
}

const std::string& TechniqueRef::most_specific_id() const {
    return subtechnique_id ? *subtechnique_id : technique_id;
}

std::string_view to_string(MatchKind kind) {
    switch (kind) {
        case MatchKind::exact: return "exact";
        case MatchKind::alias: return "alias";
        case MatchKind::fuzzy: return "fuzzy";
        case MatchKind::unmapped: return "unmapped";
    }
    return "unmapped";
}

std::optional<MatchKind> match_kind_from_string(std::string_view text) {
    for (auto kind : {MatchKind::exact, MatchKind::alias, MatchKind::fuzzy, MatchKind::unmapped}) {
        if (to_string(kind) == text) return kind;
    }
    return std::nullopt;
}

std::string normalize_key(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (unsigned char c : text) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (std::ispunct(c)) continue;
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

std::size_t damerau_levenshtein(std::string_view a, std::string_view b) {
    const std::size_t n = a.size();
    const std::size_t m = b.size();
    if (n == 0) return m;
    if (m == 0) return n;
    // Three rolling rows: i-2, i-1, i.
    std::vector<std::size_t> prev2(m + 1), prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            std::size_t best = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
            if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
                best = std::min(best, prev2[j - 2] + 1);
            }
            cur[j] = best;
        }
        std::swap(prev2, prev);
        std::swap(prev, cur);
    }
    return prev[m];
}

double dl_similarity(std::string_view a, std::string_view b) {
    const std::size_t longest = std::max(a.size(), b.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(damerau_levenshtein(a, b)) / static_cast<double>(longest);
}

namespace {

std::pair<std::size_t, std::size_t> line_col(std::string_view text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

std::string lower_tactic(std::string_view tactic) {
    std::string out;
    for (unsigned char c : tactic) {
        if (std::isspace(c) || c == '_') {
            out.push_back('-');
        } else {
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

bool has_persistence_tactic(const json& tech, const std::string& where, const std::string& origin) {
    if (!tech.contains("tactic")) throw ParseError(origin, 0, 0, where + ": missing 'tactic'");
    const auto& tactic = tech.at("tactic");
    if (tactic.is_string()) return lower_tactic(tactic.get<std::string>()) == kPersistenceTactic;
    if (tactic.is_array()) {
        for (const auto& t : tactic) {
            if (!t.is_string()) throw ParseError(origin, 0, 0, where + ": tactic must be strings");
            if (lower_tactic(t.get<std::string>()) == kPersistenceTactic) return true;
        }
        return false;
    }
    throw ParseError(origin, 0, 0, where + ": 'tactic' must be a string or array");
}

std::string required_string(const json& obj, const char* key, const std::string& where,
                            const std::string& origin) {
    if (!obj.is_object() || !obj.contains(key) || !obj.at(key).is_string()) {
        throw ParseError(origin, 0, 0, where + ": missing string field '" + key + "'");
    }
    auto value = obj.at(key).get<std::string>();
    if (normalize_key(value).empty()) {
        throw ParseError(origin, 0, 0, where + ": field '" + key + "' is empty");
    }
    return value;
}

std::vector<std::string> aliases_of(const json& obj, const std::string& where,
                                    const std::string& origin) {
    std::vector<std::string> out;
    if (!obj.contains("aliases")) return out;
    const auto& aliases = obj.at("aliases");
    if (!aliases.is_array()) throw ParseError(origin, 0, 0, where + ": 'aliases' must be an array");
    for (const auto& a : aliases) {
        if (!a.is_string()) throw ParseError(origin, 0, 0, where + ": alias must be a string");
        out.push_back(a.get<std::string>());
    }
    return out;
}

// Finds the first token shaped like an ATT&CK id (T1234 or T1234.567) in free text.
std::vector<std::string> embedded_ids(std::string_view text) {
    std::vector<std::string> ids;
    auto is_digit = [](char c) { return c >= '0' && c <= '9'; };
    auto is_alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
    for (std::size_t i = 0; i + 5 <= text.size(); ++i) {
        if (text[i] != 'T' && text[i] != 't') continue;
        if (i > 0 && is_alnum(text[i - 1])) continue;
        std::size_t j = i + 1;
        while (j < text.size() && is_digit(text[j])) ++j;
        if (j - i - 1 != 4) continue;
        std::string id = "T" + std::string(text.substr(i + 1, 4));
        if (j + 4 <= text.size() && text[j] == '.' && is_digit(text[j + 1]) &&
            is_digit(text[j + 2]) && is_digit(text[j + 3]) &&
            (j + 4 == text.size() || !is_alnum(text[j + 4]))) {
            ids.push_back(id + std::string(text.substr(j, 4)));
            ids.push_back(id);
            continue;
        }
        if (j < text.size() && is_alnum(text[j])) continue;
        ids.push_back(id);
    }
    return ids;
}

}  // namespace

Catalog Catalog::load(const std::filesystem::path& path, LoadReport* report) {
    return parse(read_text_file(path), path.string(), report);
}

Catalog Catalog::parse(std::string_view json_text, const std::string& origin, LoadReport* report) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        auto [line, col] = line_col(json_text, e.byte > 0 ? e.byte - 1 : 0);
        throw ParseError(origin, line, col, "malformed catalog JSON");
    }
    if (!doc.is_object() || !doc.contains("techniques") || !doc.at("techniques").is_array()) {
        throw ParseError(origin, 0, 0, "catalog must be an object with a 'techniques' array");
    }

    Catalog catalog;
    if (doc.contains("source_version") && doc.at("source_version").is_string()) {
        catalog.source_version_ = doc.at("source_version").get<std::string>();
    }

    LoadReport counts;
    std::vector<std::pair<TechniqueRef, std::vector<std::string>>> staged;
    std::set<std::pair<std::string, std::string>> seen;
    const auto& techniques = doc.at("techniques");
    for (std::size_t i = 0; i < techniques.size(); ++i) {
        const auto& tech = techniques[i];
        const std::string where = "techniques[" + std::to_string(i) + "]";
        const auto id = required_string(tech, "id", where, origin);
        const auto name = required_string(tech, "name", where, origin);
        if (!has_persistence_tactic(tech, where, origin)) {
            ++counts.techniques_excluded;
            continue;
        }
        ++counts.techniques_kept;
        if (!seen.emplace(id, "").second) {
            throw ParseError(origin, 0, 0, where + ": duplicate technique id " + id);
        }
        TechniqueRef base{id, name, std::nullopt, std::nullopt, std::string(kPersistenceTactic)};
        staged.emplace_back(base, aliases_of(tech, where, origin));

        if (!tech.contains("subtechniques")) continue;
        const auto& subs = tech.at("subtechniques");
        if (!subs.is_array()) {
            throw ParseError(origin, 0, 0, where + ": 'subtechniques' must be an array");
        }
        for (std::size_t k = 0; k < subs.size(); ++k) {
            const std::string sub_where = where + ".subtechniques[" + std::to_string(k) + "]";
            const auto sub_id = required_string(subs[k], "id", sub_where, origin);
            const auto sub_name = required_string(subs[k], "name", sub_where, origin);
            if (sub_id.rfind(id + ".", 0) != 0 || sub_id.size() == id.size() + 1) {
                throw ParseError(origin, 0, 0,
                                 sub_where + ": " + sub_id + " does not belong to " + id);
            }
            if (!seen.emplace(id, sub_id).second) {
                throw ParseError(origin, 0, 0, sub_where + ": duplicate sub-technique " + sub_id);
            }
            TechniqueRef ref = base;
            ref.subtechnique_id = sub_id;
            ref.subtechnique_name = sub_name;
            staged.emplace_back(std::move(ref), aliases_of(subs[k], sub_where, origin));
        }
    }
    if (report) *report = counts;
    if (staged.empty()) {
        throw EmptyCatalogError(origin + ": catalog contains no persistence-tactic techniques");
    }

    std::sort(staged.begin(), staged.end(), [](const auto& l, const auto& r) {
        return std::tie(l.first.technique_id, l.first.subtechnique_id) <
               std::tie(r.first.technique_id, r.first.subtechnique_id);
    });
    for (std::size_t i = 0; i < staged.size(); ++i) {
        auto& [ref, aliases] = staged[i];
        catalog.entries_.push_back(ref);
        catalog.id_index_.emplace(ref.most_specific_id(), i);
        catalog.add_key(catalog.name_index_, ref.most_specific_id(), i);
        catalog.add_key(catalog.name_index_, ref.display_name(), i);
        if (ref.subtechnique_name) {
            catalog.add_key(catalog.name_index_, *ref.subtechnique_name, i);
        }
        for (const auto& alias : aliases) catalog.add_key(catalog.alias_index_, alias, i);
    }
    catalog.finish_indexes();
    return catalog;
}

void Catalog::add_key(Index& index, const std::string& raw, std::size_t entry) {
    auto key = normalize_key(raw);
    if (key.empty()) return;
    index[key].push_back(entry);
}

void Catalog::finish_indexes() {
    for (auto* index : {&name_index_, &alias_index_}) {
        for (auto& [key, list] : *index) {
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
        }
    }
}

const TechniqueRef* Catalog::find_technique(std::string_view technique_id) const {
    auto it = id_index_.find(technique_id);
    if (it == id_index_.end()) return nullptr;
    const auto& ref = entries_[it->second];
    return ref.subtechnique_id ? nullptr : &ref;
}

const TechniqueRef* Catalog::find_by_id(std::string_view id) const {
    auto it = id_index_.find(id);
    return it == id_index_.end() ? nullptr : &entries_[it->second];
}

std::vector<std::string> Catalog::technique_names() const {
    std::vector<std::string> names;
    for (const auto& e : entries_) {
        if (!e.subtechnique_id) names.push_back(e.name);
    }
    std::sort(names.begin(), names.end());
    return names;
}

void Catalog::set_fuzzy_threshold(double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
        throw ArgumentError("fuzzy threshold must lie in (0, 1]");
    }
    fuzzy_threshold_ = threshold;
}

MatchResult Catalog::normalize_label(std::string_view label) const {
    const auto key = normalize_key(label);
    if (key.empty()) throw ArgumentError("technique label is empty");

    for (const auto& id : embedded_ids(label)) {
        if (auto it = id_index_.find(id); it != id_index_.end()) {
            return {MatchKind::exact, entries_[it->second], 1.0};
        }
    }
    if (auto it = name_index_.find(key); it != name_index_.end()) {
        return {MatchKind::exact, entries_[it->second.front()], 1.0};
    }
    if (auto it = alias_index_.find(key); it != alias_index_.end()) {
        return {MatchKind::alias, entries_[it->second.front()], 1.0};
    }

    double best = -1.0;
    std::size_t best_entry = entries_.size();
    for (const auto* index : {&name_index_, &alias_index_}) {
        for (const auto& [candidate, list] : *index) {
            const double sim = dl_similarity(key, candidate);
            const std::size_t entry = list.front();
            if (sim > best || (sim == best && entry < best_entry)) {
                best = sim;
                best_entry = entry;
            }
        }
    }
    if (best >= fuzzy_threshold_) return {MatchKind::fuzzy, entries_[best_entry], best};
    return {MatchKind::unmapped, std::nullopt, std::max(best, 0.0)};
}

}  // namespace persistlens
