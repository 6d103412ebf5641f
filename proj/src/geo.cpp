#include "fpscan/geo.hpp"

#include <algorithm>
#include <arpa/inet.h>
#include <charconv>
#include <cstring>
#include <sstream>

#include "fpscan/embedded.hpp"
#include "fpscan/error.hpp"
#include "fpscan/io.hpp"

namespace fpscan {

namespace {

constexpr int kMinOffset = -720;
constexpr int kMaxOffset = 840;

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::optional<int> parse_int(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

std::string masked_key(const IpAddress& ip, int bits) {
    std::string key(16, '\0');
    for (int i = 0; i < 16; ++i) {
        int keep = std::clamp(bits - i * 8, 0, 8);
        auto mask = static_cast<std::uint8_t>(keep == 0 ? 0 : (0xFF << (8 - keep)) & 0xFF);
        key[static_cast<std::size_t>(i)] = static_cast<char>(ip.bytes[static_cast<std::size_t>(i)] & mask);
    }
    return key;
}

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        fn(line_no, trim(line));
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
}

}  // namespace

OffsetSet::OffsetSet(std::initializer_list<int> offsets) : OffsetSet(from(std::vector<int>(offsets))) {}

OffsetSet OffsetSet::from(std::vector<int> offsets) {
    for (int o : offsets)
        if (o < kMinOffset || o > kMaxOffset) throw Error("UTC offset out of range: " + std::to_string(o));
    std::sort(offsets.begin(), offsets.end());
    offsets.erase(std::unique(offsets.begin(), offsets.end()), offsets.end());
    OffsetSet out;
    out.offsets_ = std::move(offsets);
    return out;
}

OffsetSet OffsetSet::parse(std::string_view text) {
    std::vector<int> out;
    text = trim(text);
    if (text.empty()) return {};
    for (auto part : split(text, ';')) {
        auto v = parse_int(part);
        if (!v) throw Error("malformed UTC offset \"" + std::string(part) + "\"");
        out.push_back(*v);
    }
    return from(std::move(out));
}

std::optional<OffsetSet> OffsetSet::from_value(const AttributeValue& value) {
    const auto* list = value.as_text_list();
    if (!list || list->empty()) return std::nullopt;
    std::vector<int> out;
    out.reserve(list->size());
    for (const auto& s : *list) {
        auto v = parse_int(s);
        if (!v || *v < kMinOffset || *v > kMaxOffset) return std::nullopt;
        out.push_back(*v);
    }
    return from(std::move(out));
}

bool OffsetSet::contains(int offset) const { return std::binary_search(offsets_.begin(), offsets_.end(), offset); }

bool OffsetSet::intersects(const OffsetSet& other) const {
    auto a = offsets_.begin();
    auto b = other.offsets_.begin();
    while (a != offsets_.end() && b != other.offsets_.end()) {
        if (*a == *b) return true;
        if (*a < *b) ++a;
        else ++b;
    }
    return false;
}

void OffsetSet::merge(const OffsetSet& other) {
    std::vector<int> out;
    std::set_union(offsets_.begin(), offsets_.end(), other.offsets_.begin(), other.offsets_.end(),
                   std::back_inserter(out));
    offsets_ = std::move(out);
}

std::string OffsetSet::to_string() const {
    std::string out;
    for (std::size_t i = 0; i < offsets_.size(); ++i) {
        if (i > 0) out += ';';
        out += std::to_string(offsets_[i]);
    }
    return out;
}

AttributeValue OffsetSet::to_value() const {
    AttributeValue::TextList list;
    list.reserve(offsets_.size());
    for (int o : offsets_) list.push_back(std::to_string(o));
    return AttributeValue::text_list(std::move(list));
}

std::optional<IpAddress> parse_ip(std::string_view text) {
    std::string s(trim(text));
    IpAddress out;
    in_addr v4{};
    if (inet_pton(AF_INET, s.c_str(), &v4) == 1) {
        out.v4 = true;
        out.bytes[10] = 0xFF;
        out.bytes[11] = 0xFF;
        std::memcpy(out.bytes.data() + 12, &v4.s_addr, 4);
        return out;
    }
    in6_addr v6{};
    if (inet_pton(AF_INET6, s.c_str(), &v6) == 1) {
        std::memcpy(out.bytes.data(), v6.s6_addr, 16);
        return out;
    }
    return std::nullopt;
}

GeoTable::GeoTable(std::vector<GeoRow> rows) : rows_(std::move(rows)) {
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        std::string_view prefix = rows_[i].prefix;
        auto slash = prefix.find('/');
        auto ip = parse_ip(prefix.substr(0, slash));
        if (!ip) throw Error("invalid prefix address in \"" + rows_[i].prefix + "\"");
        int max_bits = ip->v4 ? 32 : 128;
        int bits = max_bits;
        if (slash != std::string_view::npos) {
            auto v = parse_int(prefix.substr(slash + 1));
            if (!v || *v < 0 || *v > max_bits) throw Error("invalid prefix length in \"" + rows_[i].prefix + "\"");
            bits = *v;
        }
        if (ip->v4) bits += 96;
        auto [it, inserted] = index_[bits].emplace(masked_key(*ip, bits), i);
        if (!inserted) throw Error("duplicate prefix \"" + rows_[i].prefix + "\"");
    }
}

GeoTable GeoTable::parse_csv(std::string_view text, const std::string& source) {
    std::vector<GeoRow> rows;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (line.empty() || line.front() == '#' || line.rfind("prefix,", 0) == 0) return;
        auto fields = split(line, ',');
        if (fields.size() != 3)
            throw ParseError(source, line_no, 1, "expected 3 comma-separated fields", {"prefix,region,offsets"});
        GeoRow row{std::string(trim(fields[0])), std::string(trim(fields[1])), {}};
        try {
            row.offsets = OffsetSet::parse(fields[2]);
        } catch (const ParseError&) {
            throw;
        } catch (const Error& e) {
            throw ParseError(source, line_no, static_cast<std::size_t>(fields[2].data() - line.data()) + 1, e.what());
        }
        rows.push_back(std::move(row));
    });
    try {
        return GeoTable(std::move(rows));
    } catch (const ParseError&) {
        throw;
    } catch (const Error& e) {
        throw DataError(source + ": " + e.what());
    }
}

GeoTable GeoTable::load(const std::string& path) { return parse_csv(read_file(path), path); }

const GeoTable& GeoTable::builtin() {
    static const GeoTable table = parse_csv(*embedded_data("geo.csv"), "builtin:geo.csv");
    return table;
}

std::optional<GeoMatch> GeoTable::lookup(const IpAddress& ip) const {
    for (const auto& [bits, rows] : index_) {
        if (ip.v4 && bits < 96) continue;
        auto it = rows.find(masked_key(ip, bits));
        if (it != rows.end()) return GeoMatch{rows_[it->second].region, rows_[it->second].offsets};
    }
    return std::nullopt;
}

std::optional<GeoMatch> lookup_geo(std::string_view ip, const GeoTable& table, Diagnostics* diagnostics) {
    auto parsed = parse_ip(ip);
    if (!parsed) {
        if (diagnostics) diagnostics->warn("malformed_ip", std::string(ip));
        return std::nullopt;
    }
    return table.lookup(*parsed);
}

ZoneTable ZoneTable::parse_csv(std::string_view text, const std::string& source) {
    ZoneTable out;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (line.empty() || line.front() == '#' || line.rfind("zone,", 0) == 0) return;
        auto comma = line.find(',');
        if (comma == std::string_view::npos) throw ParseError(source, line_no, 1, "expected zone,offsets");
        try {
            out.zones_.insert_or_assign(std::string(trim(line.substr(0, comma))),
                                        OffsetSet::parse(line.substr(comma + 1)));
        } catch (const Error& e) {
            throw ParseError(source, line_no, comma + 2, e.what());
        }
    });
    return out;
}

const ZoneTable& ZoneTable::builtin() {
    static const ZoneTable table = parse_csv(*embedded_data("zones.csv"), "builtin:zones.csv");
    return table;
}

std::optional<OffsetSet> ZoneTable::find(std::string_view zone) const {
    auto it = zones_.find(zone);
    if (it == zones_.end()) return std::nullopt;
    return it->second;
}

OffsetSet timezone_to_offsets(std::string_view zone, Diagnostics* diagnostics) {
    if (auto found = ZoneTable::builtin().find(zone)) return *found;
    if (diagnostics) diagnostics->warn("unknown_zone", std::string(zone));
    return {};
}

}  // namespace fpscan
