#include "persistlens/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "persistlens/error.hpp"
#include "persistlens/fileio.hpp"

namespace persistlens {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string_view to_string(Division d) {
    return d == Division::Expert ? "Expert" : "Open";
}

std::optional<Division> parse_division(std::string_view text) {
    std::string lower;
    for (unsigned char c : text) lower.push_back(static_cast<char>(std::tolower(c)));
    if (lower == "expert") return Division::Expert;
    if (lower == "open") return Division::Open;
    return std::nullopt;
}

std::size_t Corpus::count(Division d) const {
    return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [d](const auto& r) {
        return r.participant.division == d;
    }));
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool is_blank(std::string_view s) { return trim(s).empty(); }

std::vector<std::string_view> split_lines(std::string_view contents) {
    std::vector<std::string_view> lines;
    std::size_t start = 0;
    while (start < contents.size()) {
        auto end = contents.find('\n', start);
        if (end == std::string_view::npos) end = contents.size();
        auto line = contents.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        lines.push_back(line);
        start = end + 1;
    }
    return lines;
}

// "[DDDD-DD-DD DD:DD:DD]" prefix, digits unchecked for range.
bool header_shaped(std::string_view line) {
    static constexpr std::string_view shape = "[0000-00-00 00:00:00]";
    if (line.size() < shape.size()) return false;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        const char want = shape[i];
        const char got = line[i];
        if (want == '0') {
            if (got < '0' || got > '9') return false;
        } else if (want != got) {
            return false;
        }
    }
    return true;
}

struct PendingEntry {
    Timestamp timestamp;
    std::vector<std::string_view> lines;
    std::size_t first_line = 0;
    std::vector<std::size_t> line_numbers;
};

NoteEntry finish(PendingEntry& p, const std::string& origin) {
    while (p.lines.size() > 1 && is_blank(p.lines.back())) {
        p.lines.pop_back();
        p.line_numbers.pop_back();
    }
    std::string text;
    for (std::size_t i = 0; i < p.lines.size(); ++i) {
        if (i > 0) text.push_back('\n');
        text.append(p.lines[i]);
    }
    if (is_blank(text)) throw ParseError(origin, p.first_line, 1, "note entry has no text");
    return NoteEntry{p.timestamp, std::move(text), LineSpan{p.first_line, p.line_numbers.back()}};
}

}  // namespace

OpNote parse_opnote_text(std::string_view contents, std::string participant_id,
                         const OpNoteOptions& options, const std::string& origin) {
    OpNote note;
    note.participant_id = std::move(participant_id);
    std::optional<PendingEntry> pending;

    const auto lines = split_lines(contents);
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const std::size_t line_no = i + 1;
        const auto line = lines[i];
        if (header_shaped(line)) {
            auto ts = Timestamp::parse(line.substr(1, 19));
            if (!ts) throw ParseError(origin, line_no, 2, "invalid timestamp in header");
            if (options.exercise_window && !options.exercise_window->contains(*ts)) {
                throw ParseError(origin, line_no, 2,
                                 "timestamp " + ts->to_string() + " outside exercise window");
            }
            if (pending) note.entries.push_back(finish(*pending, origin));
            auto rest = line.substr(21);
            if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
            pending = PendingEntry{*ts, {rest}, line_no, {line_no}};
            continue;
        }
        if (!pending) {
            if (is_blank(line)) continue;
            throw ParseError(origin, line_no, 1,
                             "expected a '[YYYY-MM-DD HH:MM:SS]' header before any text");
        }
        pending->lines.push_back(line);
        pending->line_numbers.push_back(line_no);
    }
    if (pending) note.entries.push_back(finish(*pending, origin));

    std::stable_sort(note.entries.begin(), note.entries.end(),
                     [](const NoteEntry& a, const NoteEntry& b) { return a.timestamp < b.timestamp; });
    return note;
}

OpNote parse_opnote(const fs::path& path, std::string participant_id, const OpNoteOptions& options) {
    return parse_opnote_text(read_text_file(path), std::move(participant_id), options, path.string());
}

std::string format_opnote(const OpNote& note) {
    std::string out;
    for (const auto& entry : note.entries) {
        out += '[';
        out += entry.timestamp.to_string();
        out += ']';
        const auto first_break = entry.text.find('\n');
        const std::string_view first = std::string_view(entry.text).substr(0, first_break);
        if (!first.empty()) {
            out += ' ';
            out.append(first);
        }
        out += '\n';
        if (first_break != std::string::npos) {
            out.append(entry.text, first_break + 1);
            out += '\n';
        }
    }
    return out;
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, comma - start)));
        start = comma + 1;
    }
    return fields;
}

std::optional<double> parse_finite(std::string_view field) {
    double value = 0.0;
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc{} || ptr != field.data() + field.size() || !std::isfinite(value)) {
        return std::nullopt;
    }
    return value;
}

const std::vector<std::string>& psychometric_columns() {
    static const std::vector<std::string> cols = {"participant_id", "division", "grips",
                                                  "admc_rc1", "admc_rc2"};
    return cols;
}

}  // namespace

std::vector<Participant> parse_psychometrics_text(std::string_view contents,
                                                  const std::string& origin) {
    const auto& columns = psychometric_columns();
    std::vector<TableIssue> issues;
    std::vector<Participant> out;

    const auto lines = split_lines(contents);
    std::size_t i = 0;
    while (i < lines.size() && is_blank(lines[i])) ++i;
    if (i == lines.size()) {
        throw TableError(origin, {{0, "", "missing header '" + std::string(kPsychometricsHeader) + "'"}});
    }
    const auto header = split_csv(lines[i]);
    if (header.size() != columns.size() ||
        !std::equal(header.begin(), header.end(), columns.begin())) {
        std::set<std::string_view> present(header.begin(), header.end());
        for (const auto& col : columns) {
            if (!present.count(col)) issues.push_back({0, col, "missing column"});
        }
        for (const auto& h : header) {
            if (std::find(columns.begin(), columns.end(), h) == columns.end()) {
                issues.push_back({0, std::string(h), "unexpected column"});
            }
        }
        if (issues.empty()) {
            issues.push_back({0, "", "header must be exactly '" + std::string(kPsychometricsHeader) + "'"});
        }
        throw TableError(origin, std::move(issues));
    }

    std::map<std::string, std::size_t, std::less<>> seen;
    std::size_t row = 0;
    for (++i; i < lines.size(); ++i) {
        if (is_blank(lines[i])) continue;
        ++row;
        const auto fields = split_csv(lines[i]);
        if (fields.size() != columns.size()) {
            issues.push_back({row, "", "expected " + std::to_string(columns.size()) + " fields, got " +
                                           std::to_string(fields.size())});
            continue;
        }
        Participant p;
        bool ok = true;
        p.participant_id = std::string(fields[0]);
        if (p.participant_id.empty()) {
            issues.push_back({row, "participant_id", "empty participant id"});
            ok = false;
        } else if (auto [it, inserted] = seen.emplace(p.participant_id, row); !inserted) {
            issues.push_back({row, "participant_id",
                              "duplicate participant id '" + p.participant_id + "' (first seen in row " +
                                  std::to_string(it->second) + ")"});
            ok = false;
        }
        if (auto d = parse_division(fields[1])) {
            p.division = *d;
        } else {
            issues.push_back({row, "division", "unknown division '" + std::string(fields[1]) + "'"});
            ok = false;
        }
        double* targets[] = {&p.psychometrics.grips, &p.psychometrics.admc_rc1,
                             &p.psychometrics.admc_rc2};
        for (std::size_t c = 0; c < 3; ++c) {
            if (auto v = parse_finite(fields[2 + c])) {
                *targets[c] = *v;
            } else {
                issues.push_back({row, columns[2 + c],
                                  "not a finite number: '" + std::string(fields[2 + c]) + "'"});
                ok = false;
            }
        }
        if (ok) out.push_back(std::move(p));
    }
    if (!issues.empty()) throw TableError(origin, std::move(issues));
    return out;
}

std::vector<Participant> parse_psychometrics(const fs::path& path) {
    return parse_psychometrics_text(read_text_file(path), path.string());
}

namespace {

std::string shortest(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

}  // namespace

std::string format_psychometrics(const std::vector<Participant>& participants) {
    std::string out(kPsychometricsHeader);
    out += '\n';
    for (const auto& p : participants) {
        out += p.participant_id;
        out += ',';
        out += to_string(p.division);
        out += ',' + shortest(p.psychometrics.grips);
        out += ',' + shortest(p.psychometrics.admc_rc1);
        out += ',' + shortest(p.psychometrics.admc_rc2);
        out += '\n';
    }
    return out;
}

Corpus join_corpus(std::vector<OpNote> notes, std::vector<Participant> participants,
                   bool allow_partial) {
    std::map<std::string, OpNote> by_id;
    for (auto& n : notes) {
        if (n.participant_id.empty()) throw ArgumentError("note with empty participant id");
        const auto id = n.participant_id;
        if (!by_id.emplace(id, std::move(n)).second) {
            throw ArgumentError("duplicate note for participant '" + id + "'");
        }
    }
    std::map<std::string, Participant> table;
    for (auto& p : participants) {
        const auto id = p.participant_id;
        if (!table.emplace(id, std::move(p)).second) {
            throw ArgumentError("duplicate psychometrics row for participant '" + id + "'");
        }
    }

    std::vector<std::string> notes_only, table_only;
    for (const auto& [id, note] : by_id) {
        if (!table.count(id)) notes_only.push_back(id);
    }
    for (const auto& [id, p] : table) {
        if (!by_id.count(id)) table_only.push_back(id);
    }
    if (!allow_partial && (!notes_only.empty() || !table_only.empty())) {
        throw JoinError(std::move(notes_only), std::move(table_only));
    }

    Corpus corpus;
    for (const auto& id : notes_only) {
        corpus.warnings.push_back("participant '" + id + "' has notes but no psychometrics row; skipped");
    }
    for (const auto& id : table_only) {
        corpus.warnings.push_back("participant '" + id + "' has a psychometrics row but no notes; skipped");
    }
    for (auto& [id, p] : table) {
        auto it = by_id.find(id);
        if (it == by_id.end()) continue;
        corpus.records.push_back({std::move(p), std::move(it->second)});
    }
    return corpus;
}

Corpus load_corpus(const fs::path& notes_dir, const fs::path& psychometrics_path,
                   bool allow_partial, const OpNoteOptions& options) {
    if (!fs::is_directory(notes_dir)) throw IoError("notes directory not found: " + notes_dir.string());
    if (!fs::is_regular_file(psychometrics_path)) {
        throw IoError("psychometrics file not found: " + psychometrics_path.string());
    }
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(notes_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == kOpNoteExtension) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    std::vector<OpNote> notes;
    notes.reserve(files.size());
    for (const auto& f : files) notes.push_back(parse_opnote(f, f.stem().string(), options));
    return join_corpus(std::move(notes), parse_psychometrics(psychometrics_path), allow_partial);
}

std::string corpus_to_json(const Corpus& corpus) {
    json doc;
    doc["participants"] = json::array();
    for (const auto& rec : corpus.records) {
        json p;
        p["participant_id"] = rec.participant.participant_id;
        p["division"] = to_string(rec.participant.division);
        p["grips"] = rec.participant.psychometrics.grips;
        p["admc_rc1"] = rec.participant.psychometrics.admc_rc1;
        p["admc_rc2"] = rec.participant.psychometrics.admc_rc2;
        p["entries"] = json::array();
        for (const auto& e : rec.note.entries) {
            p["entries"].push_back({{"timestamp", e.timestamp.to_iso()},
                                    {"text", e.text},
                                    {"lines", {e.line_span.first, e.line_span.last}}});
        }
        doc["participants"].push_back(std::move(p));
    }
    doc["warnings"] = corpus.warnings;
    return doc.dump(2) + "\n";
}

Corpus corpus_from_json(std::string_view text, const std::string& origin) {
    Corpus corpus;
    try {
        const auto doc = json::parse(text);
        for (const auto& p : doc.at("participants")) {
            ParticipantRecord rec;
            rec.participant.participant_id = p.at("participant_id").get<std::string>();
            auto division = parse_division(p.at("division").get<std::string>());
            if (!division) throw ParseError(origin, 0, 0, "unknown division");
            rec.participant.division = *division;
            rec.participant.psychometrics = {p.at("grips").get<double>(), p.at("admc_rc1").get<double>(),
                                             p.at("admc_rc2").get<double>()};
            rec.note.participant_id = rec.participant.participant_id;
            for (const auto& e : p.at("entries")) {
                auto ts = Timestamp::parse(e.at("timestamp").get<std::string>());
                if (!ts) throw ParseError(origin, 0, 0, "bad timestamp in corpus");
                const auto& lines = e.at("lines");
                rec.note.entries.push_back(
                    {*ts, e.at("text").get<std::string>(),
                     LineSpan{lines.at(0).get<std::size_t>(), lines.at(1).get<std::size_t>()}});
            }
            corpus.records.push_back(std::move(rec));
        }
        if (doc.contains("warnings")) corpus.warnings = doc.at("warnings").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
        throw ParseError(origin, 0, 0, std::string("malformed corpus file: ") + e.what());
    }
    return corpus;
}

}  // namespace persistlens
