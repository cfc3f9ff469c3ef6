#include "persistlens/error.hpp"

#include <sstream>

namespace persistlens {

namespace {

std::string format_parse(const std::string& path, std::size_t line, std::size_t column,
                         const std::string& what) {
    std::ostringstream out;
    out << (path.empty() ? "<input>" : path);
    if (line > 0) {
        out << ':' << line;
        if (column > 0) out << ':' << column;
    }
    out << ": " << what;
    return out.str();
}

std::string format_table(const std::string& path, const std::vector<TableIssue>& issues) {
    std::ostringstream out;
    out << path << ": " << issues.size() << " problem(s)";
    for (const auto& issue : issues) {
        out << "\n  row " << issue.row;
        if (!issue.column.empty()) out << ", column '" << issue.column << "'";
        out << ": " << issue.message;
    }
    return out.str();
}

std::string join_ids(const std::vector<std::string>& ids) {
    std::string out;
    for (const auto& id : ids) {
        if (!out.empty()) out += ", ";
        out += id;
    }
    return out;
}

std::string format_join(const std::vector<std::string>& notes_only,
                        const std::vector<std::string>& table_only) {
    std::string out = "participant join failed";
    if (!notes_only.empty()) out += "; notes without psychometrics row: " + join_ids(notes_only);
    if (!table_only.empty()) out += "; psychometrics rows without notes: " + join_ids(table_only);
    return out;
}

}  // namespace

ParseError::ParseError(std::string path, std::size_t line, std::size_t column,
                       const std::string& what)
    : Error(format_parse(path, line, column, what)),
      path_(std::move(path)),
      line_(line),
      column_(column) {}

TableError::TableError(std::string path, std::vector<TableIssue> issues)
    : Error(format_table(path, issues)), path_(std::move(path)), issues_(std::move(issues)) {}

JoinError::JoinError(std::vector<std::string> notes_only, std::vector<std::string> table_only)
    : Error(format_join(notes_only, table_only)),
      notes_only_(std::move(notes_only)),
      table_only_(std::move(table_only)) {}

}  // namespace persistlens
