#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fpscan {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Text that could not be parsed. Line and column are 1-based; column counts
/// bytes from the start of the line.
class ParseError : public Error {
public:
    ParseError(std::string source, std::size_t line, std::size_t column, std::string message,
               std::vector<std::string> expected = {});

    const std::string& source() const noexcept { return source_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& detail() const noexcept { return detail_; }
    const std::vector<std::string>& expected() const noexcept { return expected_; }

private:
    std::string source_;
    std::size_t line_;
    std::size_t column_;
    std::string detail_;
    std::vector<std::string> expected_;
};

/// Attribute names outside the registry vocabulary.
class UnknownAttributeError : public Error {
public:
    explicit UnknownAttributeError(std::vector<std::string> names);
    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    std::vector<std::string> names_;
};

/// Well-formed input whose content violates a contract (dangling references,
/// degenerate splits, missing catalog entries, corrupt snapshots).
class DataError : public Error {
public:
    using Error::Error;
};

/// Converts a byte offset into a 1-based (line, column) pair.
std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset);

}  // namespace fpscan
