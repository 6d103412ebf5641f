#include "fpscan/error.hpp"

#include <algorithm>
#include <string_view>

namespace fpscan {

namespace {

std::string format_parse_error(const std::string& source, std::size_t line, std::size_t column,
                               const std::string& message,
                               const std::vector<std::string>& expected) {
    std::string out = source.empty() ? std::string("<input>") : source;
    out += ":" + std::to_string(line) + ":" + std::to_string(column) + ": " + message;
    if (!expected.empty()) {
        out += " (expected ";
        for (std::size_t i = 0; i < expected.size(); ++i) {
            if (i > 0) out += i + 1 == expected.size() ? " or " : ", ";
            out += expected[i];
        }
        out += ")";
    }
    return out;
}

std::string format_unknown(const std::vector<std::string>& names) {
    std::string out = "unknown attribute name";
    out += names.size() == 1 ? ": " : "s: ";
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i > 0) out += ", ";
        out += names[i];
    }
    return out;
}

}  // namespace

ParseError::ParseError(std::string source, std::size_t line, std::size_t column,
                       std::string message, std::vector<std::string> expected)
    : Error(format_parse_error(source, line, column, message, expected)),
      source_(std::move(source)),
      line_(line),
      column_(column),
      detail_(std::move(message)),
      expected_(std::move(expected)) {}

UnknownAttributeError::UnknownAttributeError(std::vector<std::string> names)
    : Error(format_unknown(names)), names_(std::move(names)) {}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
    offset = std::min(offset, text.size());
    std::size_t line = 1;
    std::size_t line_start = 0;
    for (std::size_t i = 0; i < offset; ++i) {
        if (text[i] == '\n') {
            ++line;
            line_start = i + 1;
        }
    }
    return {line, offset - line_start + 1};
}

}  // namespace fpscan
