#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "persistlens/timestamp.hpp"

namespace persistlens {

struct LineSpan {
    std::size_t first = 0;  // 1-based, inclusive
    std::size_t last = 0;

    friend bool operator==(const LineSpan&, const LineSpan&) = default;
};

struct NoteEntry {
    Timestamp timestamp;
    std::string text;  // header text plus continuation lines, joined with '\n'
    LineSpan line_span;

    friend bool operator==(const NoteEntry&, const NoteEntry&) = default;
};

struct OpNote {
    std::string participant_id;
    std::vector<NoteEntry> entries;  // stable-sorted by timestamp
};

enum class Division { Expert, Open };

std::string_view to_string(Division d);
// Case-insensitive.
std::optional<Division> parse_division(std::string_view text);

struct PsychometricProfile {
    double grips = 0.0;
    double admc_rc1 = 0.0;
    double admc_rc2 = 0.0;
};

struct Participant {
    std::string participant_id;
    Division division = Division::Expert;
    PsychometricProfile psychometrics;
};

struct OpNoteOptions {
    std::optional<TimeWindow> exercise_window;
};

inline constexpr std::string_view kPsychometricsHeader =
    "participant_id,division,grips,admc_rc1,admc_rc2";
inline constexpr std::string_view kOpNoteExtension = ".opnote";

// Grammar, one entry per header:
//   [YYYY-MM-DD HH:MM:SS] <text>
//   <continuation line>*
// Blank lines before the first header are ignored; trailing blank lines of an
// entry are dropped. Any other line before the first header is an error.
OpNote parse_opnote_text(std::string_view contents, std::string participant_id,
                         const OpNoteOptions& options = {}, const std::string& origin = "");
OpNote parse_opnote(const std::filesystem::path& path, std::string participant_id,
                    const OpNoteOptions& options = {});

// Canonical re-serialization. Parsing the output reproduces every timestamp and text.
std::string format_opnote(const OpNote& note);

std::vector<Participant> parse_psychometrics_text(std::string_view contents,
                                                  const std::string& origin = "");
std::vector<Participant> parse_psychometrics(const std::filesystem::path& path);
std::string format_psychometrics(const std::vector<Participant>& participants);

struct ParticipantRecord {
    Participant participant;
    OpNote note;
};

struct Corpus {
    std::vector<ParticipantRecord> records;  // sorted by participant_id
    std::vector<std::string> warnings;

    std::size_t count(Division d) const;
};

// Joins <notes_dir>/*.opnote (participant id = file stem) with the psychometrics
// table. Without allow_partial any orphan on either side raises JoinError.
Corpus load_corpus(const std::filesystem::path& notes_dir,
                   const std::filesystem::path& psychometrics_path, bool allow_partial = false,
                   const OpNoteOptions& options = {});

// Pure join of already parsed inputs; used by load_corpus.
Corpus join_corpus(std::vector<OpNote> notes, std::vector<Participant> participants,
                   bool allow_partial);

// Corpus snapshot written by the ingest stage.
std::string corpus_to_json(const Corpus& corpus);
Corpus corpus_from_json(std::string_view text, const std::string& origin = "");

}  // namespace persistlens
