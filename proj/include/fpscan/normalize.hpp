#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fpscan/diagnostics.hpp"
#include "fpscan/geo.hpp"
#include "fpscan/record.hpp"
#include "fpscan/registry.hpp"
#include "fpscan/ua.hpp"

namespace fpscan {

/// IP and ASN block lists. IPs are stored in canonical textual form so
/// that differently written addresses compare equal.
struct BlockLists {
    std::set<std::string> ips;
    std::map<std::int64_t, bool> asns;

    /// Newline-delimited IPs (blank lines and `#` comments ignored).
    static std::set<std::string> parse_ip_list(std::string_view text, const std::string& source = "ip-list");
    /// CSV `asn,flag` with flag one of true/false/1/0 (header optional).
    static std::map<std::int64_t, bool> parse_asn_map(std::string_view text, const std::string& source = "asn-map");
};

/// Sets `ip.blocklisted` and `asn.blocklisted`. Both are Absent when the IP
/// is not a literal address (hashed); otherwise a missing ASN counts as not
/// listed.
FingerprintRecord annotate_blocklists(FingerprintRecord record, const std::set<std::string>& ip_list,
                                      const std::map<std::int64_t, bool>& asn_map);

/// Turns raw log lines into FingerprintRecords: canonical attribute names,
/// UA-derived `ua.*` fields, IP geolocation and timezone offset sets.
///
/// Normalizing an already-normalized record is a no-op. UA parses are
/// memoized, so one instance must not be shared across threads.
class Normalizer {
public:
    Normalizer(const AttributeRegistry& registry, const GeoTable& geo, const ZoneTable& zones = ZoneTable::builtin());

    FingerprintRecord normalize(const nlohmann::json& object, const std::string& fallback_id,
                                Diagnostics* diagnostics = nullptr) const;
    /// Throws ParseError/DataError for malformed lines.
    FingerprintRecord normalize_line(std::string_view line, const std::string& fallback_id,
                                     Diagnostics* diagnostics = nullptr) const;
    /// Recomputes every derived attribute of `record` in place.
    void derive(FingerprintRecord& record, Diagnostics* diagnostics = nullptr) const;

    const AttributeRegistry& registry() const noexcept { return registry_; }

private:
    const UaFields& parse_ua(const std::string& raw) const;

    const AttributeRegistry& registry_;
    const GeoTable& geo_;
    const ZoneTable& zones_;
    mutable std::unordered_map<std::string, UaFields> ua_cache_;
};

/// Single-line convenience over the built-in registry.
FingerprintRecord normalize_record(std::string_view raw_json_line, const GeoTable& geo);

struct IngestError {
    std::size_t line = 0;
    std::string message;
};

struct IngestResult {
    std::vector<FingerprintRecord> records;
    std::vector<IngestError> errors;
    Diagnostics diagnostics;
    std::size_t lines = 0;  // == records.size() + errors.size()
};

struct IngestOptions {
    std::string source_name = "input";
    const BlockLists* blocklists = nullptr;
};

/// Normalizes every line; bad lines (blank ones included) become
/// IngestErrors and processing continues. Records without record_id get
/// `<source_name>:<line>`.
IngestResult ingest(std::istream& in, const Normalizer& normalizer, const IngestOptions& options = {});

/// Streaming form of ingest: records go to `sink` as they are read and the
/// result's `records` stays empty.
IngestResult ingest_each(std::istream& in, const Normalizer& normalizer, const IngestOptions& options,
                         const std::function<void(FingerprintRecord&&)>& sink);

}  // namespace fpscan
