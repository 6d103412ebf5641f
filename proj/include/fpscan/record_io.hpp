#pragma once

#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fpscan/diagnostics.hpp"
#include "fpscan/record.hpp"
#include "fpscan/registry.hpp"

namespace fpscan {

/// Converts a JSON attribute value. With a registered `kind` the value is
/// coerced to that kind (e.g. [w,h] or "WxH" to Resolution, list of plugin
/// objects to their names); values that cannot be coerced are kept as Text
/// and counted under "coerced_attribute".
AttributeValue attribute_from_json(const nlohmann::json& value, std::optional<ValueKind> kind,
                                   Diagnostics* diagnostics = nullptr);
nlohmann::json attribute_to_json(const AttributeValue& value);

/// Reads the log schema without deriving anything. Unregistered attribute
/// names are kept; registered aliases are mapped to their canonical name.
/// Throws DataError on schema violations. `fallback_id` is used when the
/// object has no record_id.
FingerprintRecord record_from_json(const nlohmann::json& object, const AttributeRegistry& registry,
                                   const std::string& fallback_id, Diagnostics* diagnostics = nullptr);
/// Parses one JSONL line with `<source>:<line_no>` as fallback id. Errors
/// name source and line.
FingerprintRecord record_from_line(std::string_view line, const AttributeRegistry& registry,
                                   const std::string& source, std::size_t line_no,
                                   Diagnostics* diagnostics = nullptr);

nlohmann::json record_to_json(const FingerprintRecord& record);
std::string record_to_line(const FingerprintRecord& record);

/// Reads normalized JSONL. Blank lines are skipped; any malformed line
/// throws ParseError/DataError naming `source` and the line number.
std::vector<FingerprintRecord> read_records(std::istream& in, const AttributeRegistry& registry,
                                            const std::string& source = "records");
std::vector<FingerprintRecord> read_records_file(const std::string& path, const AttributeRegistry& registry);
void write_records(std::ostream& out, const std::vector<FingerprintRecord>& records);

SourceLabel parse_label(const std::string& text);

}  // namespace fpscan
