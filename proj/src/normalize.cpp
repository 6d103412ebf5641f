#include "fpscan/normalize.hpp"

#include <arpa/inet.h>

#include "fpscan/error.hpp"
#include "fpscan/record_io.hpp"

namespace fpscan {

namespace {

using json = nlohmann::json;

std::string canonical_ip_text(const IpAddress& ip) {
    char buf[INET6_ADDRSTRLEN] = {};
    if (ip.v4) inet_ntop(AF_INET, ip.bytes.data() + 12, buf, sizeof(buf));
    else inet_ntop(AF_INET6, ip.bytes.data(), buf, sizeof(buf));
    return buf;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// FingerprintJS reports touch support as {maxTouchPoints, touchEvent, touchStart}.
void flatten_touch_support(json& attributes) {
    for (const char* key : {"touchSupport", "touch_support"}) {
        auto it = attributes.find(key);
        if (it == attributes.end() || !it->is_object()) continue;
        json obj = *it;
        bool event = obj.value("touchEvent", false);
        bool start = obj.value("touchStart", false);
        std::string text = event && start ? "touchEvent/touchStart" : event ? "touchEvent" : start ? "touchStart" : "None";
        attributes.erase(it);
        attributes["touch_support"] = text;
        if (obj.contains("maxTouchPoints") && !attributes.contains("maxTouchPoints") &&
            !attributes.contains("max_touch_points"))
            attributes["max_touch_points"] = obj["maxTouchPoints"];
    }
}

}  // namespace

std::set<std::string> BlockLists::parse_ip_list(std::string_view text, const std::string& source) {
    std::set<std::string> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        auto line = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        ++line_no;
        if (!line.empty() && line.front() != '#') {
            auto ip = parse_ip(line);
            if (!ip) throw ParseError(source, line_no, 1, "not an IP address: " + std::string(line));
            out.insert(canonical_ip_text(*ip));
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

std::map<std::int64_t, bool> BlockLists::parse_asn_map(std::string_view text, const std::string& source) {
    std::map<std::int64_t, bool> out;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        auto line = trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        ++line_no;
        if (!line.empty() && line.front() != '#' && line.rfind("asn,", 0) != 0) {
            auto comma = line.find(',');
            if (comma == std::string_view::npos) throw ParseError(source, line_no, 1, "expected asn,flag");
            auto asn_text = trim(line.substr(0, comma));
            if (asn_text.size() > 2 && (asn_text.substr(0, 2) == "AS" || asn_text.substr(0, 2) == "as"))
                asn_text.remove_prefix(2);
            std::int64_t asn = 0;
            try {
                std::size_t pos = 0;
                asn = std::stoll(std::string(asn_text), &pos);
                if (pos != asn_text.size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError(source, line_no, 1, "malformed ASN");
            }
            auto flag = trim(line.substr(comma + 1));
            bool value;
            if (flag == "true" || flag == "1") value = true;
            else if (flag == "false" || flag == "0") value = false;
            else throw ParseError(source, line_no, comma + 2, "flag must be true/false/1/0");
            out[asn] = value;
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    return out;
}

FingerprintRecord annotate_blocklists(FingerprintRecord record, const std::set<std::string>& ip_list,
                                      const std::map<std::int64_t, bool>& asn_map) {
    auto ip = parse_ip(record.ip);
    if (!ip) {
        record.set("ip.blocklisted", AttributeValue::absent());
        record.set("asn.blocklisted", AttributeValue::absent());
        return record;
    }
    record.set("ip.blocklisted", AttributeValue::flag(ip_list.count(canonical_ip_text(*ip)) > 0));
    bool asn_listed = false;
    if (const auto* asn = record.get("ip.asn").as_integer()) {
        auto it = asn_map.find(*asn);
        asn_listed = it != asn_map.end() && it->second;
    }
    record.set("asn.blocklisted", AttributeValue::flag(asn_listed));
    return record;
}

Normalizer::Normalizer(const AttributeRegistry& registry, const GeoTable& geo, const ZoneTable& zones)
    : registry_(registry), geo_(geo), zones_(zones) {}

const UaFields& Normalizer::parse_ua(const std::string& raw) const {
    auto it = ua_cache_.find(raw);
    if (it != ua_cache_.end()) return it->second;
    if (ua_cache_.size() > 100000) ua_cache_.clear();
    return ua_cache_.emplace(raw, parse_user_agent(raw)).first->second;
}

void Normalizer::derive(FingerprintRecord& r, Diagnostics* diagnostics) const {
    const auto& ua = parse_ua(r.user_agent);
    r.set("user_agent", AttributeValue::text(r.user_agent));
    r.set("ua.device", AttributeValue::text(ua.device));
    r.set("ua.browser", AttributeValue::text(ua.browser));
    r.set("ua.os", AttributeValue::text(ua.os));
    r.set("ua.vendor", AttributeValue::text(device_brand(ua.device)));

    std::optional<GeoMatch> geo;
    if (!r.ip.empty()) geo = lookup_geo(r.ip, geo_, diagnostics);
    if (geo) {
        r.set("ip.location", AttributeValue::text(geo->region));
        r.set("ip.location.offsets", geo->offsets.to_value());
    } else {
        r.set("ip.location", AttributeValue::absent());
        r.set("ip.location.offsets", AttributeValue::absent());
    }

    AttributeValue tz_offsets;
    if (const auto* zone = r.get("timezone").as_text()) {
        if (auto offsets = zones_.find(*zone)) tz_offsets = offsets->to_value();
        else if (diagnostics) diagnostics->warn("unknown_zone", *zone);
    }
    r.set("timezone.offsets", std::move(tz_offsets));
}

FingerprintRecord Normalizer::normalize(const json& object, const std::string& fallback_id,
                                        Diagnostics* diagnostics) const {
    const json* source = &object;
    json patched;
    if (object.is_object()) {
        auto attrs = object.find("attributes");
        if (attrs != object.end() && attrs->is_object() &&
            (attrs->contains("touchSupport") || attrs->contains("touch_support"))) {
            patched = object;
            flatten_touch_support(patched["attributes"]);
            source = &patched;
        }
    }
    FingerprintRecord record = record_from_json(*source, registry_, fallback_id, diagnostics);
    derive(record, diagnostics);
    return record;
}

FingerprintRecord Normalizer::normalize_line(std::string_view line, const std::string& fallback_id,
                                             Diagnostics* diagnostics) const {
    json object;
    try {
        object = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError("", 1, e.byte == 0 ? 1 : e.byte, "malformed JSON");
    }
    return normalize(object, fallback_id, diagnostics);
}

FingerprintRecord normalize_record(std::string_view raw_json_line, const GeoTable& geo) {
    Normalizer normalizer(AttributeRegistry::builtin(), geo);
    return normalizer.normalize_line(raw_json_line, "record");
}

IngestResult ingest_each(std::istream& in, const Normalizer& normalizer, const IngestOptions& options,
                         const std::function<void(FingerprintRecord&&)>& sink) {
    IngestResult result;
    std::string line;
    while (std::getline(in, line)) {
        ++result.lines;
        std::string fallback = options.source_name + ":" + std::to_string(result.lines);
        if (trim(line).empty()) {
            result.errors.push_back({result.lines, "empty line"});
            continue;
        }
        try {
            auto record = normalizer.normalize_line(line, fallback, &result.diagnostics);
            if (options.blocklists)
                record = annotate_blocklists(std::move(record), options.blocklists->ips, options.blocklists->asns);
            sink(std::move(record));
        } catch (const Error& e) {
            result.errors.push_back({result.lines, e.what()});
        }
    }
    return result;
}

IngestResult ingest(std::istream& in, const Normalizer& normalizer, const IngestOptions& options) {
    std::vector<FingerprintRecord> records;
    auto result = ingest_each(in, normalizer, options, [&](FingerprintRecord&& r) { records.push_back(std::move(r)); });
    result.records = std::move(records);
    return result;
}

}  // namespace fpscan
