#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fpscan/diagnostics.hpp"
#include "fpscan/value.hpp"

namespace fpscan {

/// Set of UTC offsets in minutes, kept sorted and unique. Each offset lies
/// in [-720, +840].
class OffsetSet {
public:
    OffsetSet() = default;
    OffsetSet(std::initializer_list<int> offsets);
    static OffsetSet from(std::vector<int> offsets);
    /// Parses "60;120". Throws fpscan::Error on malformed or out-of-range input.
    static OffsetSet parse(std::string_view text);
    /// Reads the TextList form stored on records (["60","120"]).
    static std::optional<OffsetSet> from_value(const AttributeValue& value);

    bool empty() const noexcept { return offsets_.empty(); }
    std::size_t size() const noexcept { return offsets_.size(); }
    bool contains(int offset) const;
    bool intersects(const OffsetSet& other) const;
    void merge(const OffsetSet& other);
    const std::vector<int>& values() const noexcept { return offsets_; }

    std::string to_string() const;  // "60;120"
    AttributeValue to_value() const;  // TextList ["60","120"]

    friend bool operator==(const OffsetSet&, const OffsetSet&) = default;

private:
    std::vector<int> offsets_;
};

/// IPv4 or IPv6 address; IPv4 is stored v4-mapped.
struct IpAddress {
    std::array<std::uint8_t, 16> bytes{};
    bool v4 = false;
};

/// Returns nullopt for anything that is not a literal IP (e.g. hashed IPs).
std::optional<IpAddress> parse_ip(std::string_view text);

struct GeoMatch {
    std::string region;
    OffsetSet offsets;

    friend bool operator==(const GeoMatch&, const GeoMatch&) = default;
};

struct GeoRow {
    std::string prefix;  // CIDR, or a bare address meaning a host route
    std::string region;  // "Country/Subdivision"
    OffsetSet offsets;
};

/// Offline IP-prefix to region table. Prefixes may nest; the longest
/// matching prefix wins. Identical prefixes are rejected at load time.
class GeoTable {
public:
    GeoTable() = default;
    explicit GeoTable(std::vector<GeoRow> rows);

    /// CSV `prefix,region,offsets`, offsets `;`-joined minutes. A header row
    /// starting with "prefix" and `#` comment lines are skipped.
    static GeoTable parse_csv(std::string_view text, const std::string& source = "geo");
    static GeoTable load(const std::string& path);
    /// The synthetic table shipped in data/geo.csv.
    static const GeoTable& builtin();

    std::optional<GeoMatch> lookup(const IpAddress& ip) const;
    const std::vector<GeoRow>& rows() const noexcept { return rows_; }
    bool empty() const noexcept { return rows_.empty(); }

private:
    std::vector<GeoRow> rows_;
    // prefix length (IPv6 bits) -> masked address -> row index, longest first
    std::map<int, std::unordered_map<std::string, std::size_t>, std::greater<>> index_;
};

/// Longest-prefix match. Unparseable addresses (hashed IPs included) yield
/// nullopt and count a "malformed_ip" warning.
std::optional<GeoMatch> lookup_geo(std::string_view ip, const GeoTable& table, Diagnostics* diagnostics = nullptr);

/// IANA zone name to the standard and DST offsets it used in 2023.
class ZoneTable {
public:
    /// CSV `zone,offsets` (header `zone,offsets` optional).
    static ZoneTable parse_csv(std::string_view text, const std::string& source = "zones");
    static const ZoneTable& builtin();

    std::optional<OffsetSet> find(std::string_view zone) const;
    const std::map<std::string, OffsetSet, std::less<>>& zones() const noexcept { return zones_; }

private:
    std::map<std::string, OffsetSet, std::less<>> zones_;
};

/// Offsets for `zone` from the built-in table; unknown zones return an
/// empty set and count an "unknown_zone" warning.
OffsetSet timezone_to_offsets(std::string_view zone, Diagnostics* diagnostics = nullptr);

}  // namespace fpscan
