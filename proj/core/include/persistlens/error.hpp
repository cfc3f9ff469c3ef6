#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace persistlens {

// Base for every error raised by the library. Callers that only care about
// success/failure catch this; the CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Precondition violated by the caller (empty label, df < 1, x outside [0,1]...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

// Text input that does not follow its grammar. line/column are 1-based; 0 means unknown.
class ParseError : public Error {
public:
    ParseError(std::string path, std::size_t line, std::size_t column, const std::string& what);

    const std::string& path() const noexcept { return path_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string path_;
    std::size_t line_;
    std::size_t column_;
};

class EmptyCatalogError : public Error {
public:
    using Error::Error;
};

struct TableIssue {
    std::size_t row = 0;  // 1-based data row, 0 for the header
    std::string column;
    std::string message;
};

// One or more row/column problems in a CSV table.
class TableError : public Error {
public:
    TableError(std::string path, std::vector<TableIssue> issues);

    const std::string& path() const noexcept { return path_; }
    const std::vector<TableIssue>& issues() const noexcept { return issues_; }

private:
    std::string path_;
    std::vector<TableIssue> issues_;
};

// Participant ids present on only one side of the notes/psychometrics join.
class JoinError : public Error {
public:
    JoinError(std::vector<std::string> notes_only, std::vector<std::string> table_only);

    const std::vector<std::string>& notes_only() const noexcept { return notes_only_; }
    const std::vector<std::string>& table_only() const noexcept { return table_only_; }

private:
    std::vector<std::string> notes_only_;
    std::vector<std::string> table_only_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Statistical input with no defined answer: constant vector, |r| = 1.
class DegenerateInputError : public Error {
public:
    DegenerateInputError(std::string column, const std::string& what)
        : Error(what), column_(std::move(column)) {}

    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

class SingularDesignError : public DegenerateInputError {
public:
    using DegenerateInputError::DegenerateInputError;
};

class InsufficientDataError : public Error {
public:
    using Error::Error;
};

// The model endpoint could not be reached or kept failing after retries.
class TransportError : public Error {
public:
    using Error::Error;
};

class CacheMissError : public Error {
public:
    CacheMissError(std::string key, const std::string& what) : Error(what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace persistlens
