#include "fpscan/record_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fpscan/error.hpp"

namespace fpscan {

namespace {

using json = nlohmann::json;

AttributeValue coerced_text(const json& value, Diagnostics* diagnostics, ValueKind wanted) {
    if (diagnostics)
        diagnostics->warn("coerced_attribute",
                          "expected " + std::string(to_string(wanted)) + ", got " + value.dump());
    return AttributeValue::text(value.is_string() ? value.get<std::string>() : value.dump());
}

std::optional<std::int64_t> integral(const json& v) {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_unsigned()) {
        auto u = v.get<std::uint64_t>();
        if (u <= static_cast<std::uint64_t>(INT64_MAX)) return static_cast<std::int64_t>(u);
        return std::nullopt;
    }
    if (v.is_number_float()) {
        double d = v.get<double>();
        if (std::isfinite(d) && std::floor(d) == d && std::fabs(d) < 9.0e15) return static_cast<std::int64_t>(d);
    }
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        try {
            std::size_t pos = 0;
            long long n = std::stoll(s, &pos);
            if (pos == s.size()) return n;
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

std::optional<double> numeric(const json& v) {
    if (v.is_number()) {
        double d = v.get<double>();
        if (std::isfinite(d)) return d;
        return std::nullopt;
    }
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        try {
            std::size_t pos = 0;
            double d = std::stod(s, &pos);
            if (pos == s.size() && std::isfinite(d)) return d;
        } catch (const std::exception&) {
        }
    }
    return std::nullopt;
}

std::string list_element(const json& e) {
    if (e.is_string()) return e.get<std::string>();
    if (e.is_object() && e.contains("name") && e["name"].is_string()) return e["name"].get<std::string>();
    return e.dump();
}

AttributeValue untyped(const json& value) {
    switch (value.type()) {
        case json::value_t::null: return AttributeValue::absent();
        case json::value_t::boolean: return AttributeValue::flag(value.get<bool>());
        case json::value_t::number_integer:
            return AttributeValue::integer(value.get<std::int64_t>());
        case json::value_t::number_unsigned:
            if (auto i = integral(value)) return AttributeValue::integer(*i);
            return AttributeValue::text(value.dump());
        case json::value_t::number_float: {
            double d = value.get<double>();
            if (std::isfinite(d)) return AttributeValue::real(d);
            return AttributeValue::text(value.dump());
        }
        case json::value_t::string: return AttributeValue::text(value.get<std::string>());
        case json::value_t::array: {
            bool all_strings = true;
            for (const auto& e : value) all_strings = all_strings && e.is_string();
            if (all_strings) return AttributeValue::text_list(value.get<std::vector<std::string>>());
            return AttributeValue::text(value.dump());
        }
        default: return AttributeValue::text(value.dump());
    }
}

std::string require_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) throw DataError(std::string("missing required field \"") + key + "\"");
    if (!it->is_string()) throw DataError(std::string("field \"") + key + "\" must be a string");
    return it->get<std::string>();
}

std::optional<std::string> optional_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw DataError(std::string("field \"") + key + "\" must be a string");
    return it->get<std::string>();
}

}  // namespace

AttributeValue attribute_from_json(const json& value, std::optional<ValueKind> kind, Diagnostics* diagnostics) {
    if (value.is_null()) return AttributeValue::absent();
    if (!kind) return untyped(value);
    switch (*kind) {
        case ValueKind::Absent: return AttributeValue::absent();
        case ValueKind::Text:
            if (value.is_string()) return AttributeValue::text(value.get<std::string>());
            return coerced_text(value, diagnostics, *kind);
        case ValueKind::Integer:
            if (auto i = integral(value)) return AttributeValue::integer(*i);
            return coerced_text(value, diagnostics, *kind);
        case ValueKind::Real:
            if (auto d = numeric(value)) return AttributeValue::real(*d);
            return coerced_text(value, diagnostics, *kind);
        case ValueKind::Flag:
            if (value.is_boolean()) return AttributeValue::flag(value.get<bool>());
            if (value == "true") return AttributeValue::flag(true);
            if (value == "false") return AttributeValue::flag(false);
            return coerced_text(value, diagnostics, *kind);
        case ValueKind::TextList:
            if (value.is_array()) {
                AttributeValue::TextList out;
                out.reserve(value.size());
                for (const auto& e : value) out.push_back(list_element(e));
                return AttributeValue::text_list(std::move(out));
            }
            return coerced_text(value, diagnostics, *kind);
        case ValueKind::Resolution: {
            if (value.is_array() && value.size() == 2) {
                auto w = integral(value[0]);
                auto h = integral(value[1]);
                if (w && h && *w > 0 && *h > 0 && *w < (1 << 30) && *h < (1 << 30))
                    return AttributeValue::resolution(static_cast<std::uint32_t>(*w), static_cast<std::uint32_t>(*h));
            } else if (value.is_string()) {
                auto parsed = parse_canonical(value.get<std::string>());
                if (parsed.kind() == ValueKind::Resolution) return parsed;
            }
            return coerced_text(value, diagnostics, *kind);
        }
    }
    return untyped(value);
}

json attribute_to_json(const AttributeValue& value) {
    switch (value.kind()) {
        case ValueKind::Absent: return nullptr;
        case ValueKind::Text: return *value.as_text();
        case ValueKind::Integer: return *value.as_integer();
        case ValueKind::Real: return *value.as_real();
        case ValueKind::Flag: return *value.as_flag();
        case ValueKind::TextList: return *value.as_text_list();
        case ValueKind::Resolution: {
            auto r = *value.as_resolution();
            return json::array({r.width, r.height});
        }
    }
    return nullptr;
}

SourceLabel parse_label(const std::string& text) {
    if (text == "human") return SourceLabel::human();
    if (text == "unknown" || text.empty()) return SourceLabel::unknown();
    if (text == "bot") return SourceLabel::bot("");
    if (text.rfind("bot:", 0) == 0) return SourceLabel::bot(text.substr(4));
    throw DataError("invalid label \"" + text + "\"");
}

FingerprintRecord record_from_json(const json& object, const AttributeRegistry& registry,
                                   const std::string& fallback_id, Diagnostics* diagnostics) {
    if (!object.is_object()) throw DataError("record must be a JSON object");
    FingerprintRecord r;
    r.record_id = optional_string(object, "record_id").value_or(fallback_id);

    auto ts = object.find("timestamp");
    if (ts == object.end()) throw DataError("missing required field \"timestamp\"");
    auto ts_value = integral(*ts);
    if (!ts_value || ts->is_string()) throw DataError("field \"timestamp\" must be an integer (UTC ms)");
    r.timestamp_ms = *ts_value;

    r.ip = optional_string(object, "ip").value_or("");
    r.cookie_id = optional_string(object, "cookie_id");
    r.url_token = optional_string(object, "url_token");
    r.user_agent = require_string(object, "user_agent");

    auto attrs = object.find("attributes");
    if (attrs == object.end()) throw DataError("missing required field \"attributes\"");
    if (!attrs->is_object()) throw DataError("field \"attributes\" must be an object");
    for (auto it = attrs->begin(); it != attrs->end(); ++it) {
        std::string name = it.key();
        if (!registry.contains(name)) {
            if (auto canonical = registry.resolve_alias(name)) name = std::string(*canonical);
        }
        r.attributes.insert_or_assign(name, attribute_from_json(it.value(), registry.kind(name), diagnostics));
    }

    if (auto v = object.find("verdicts"); v != object.end() && !v->is_null()) {
        if (!v->is_object()) throw DataError("field \"verdicts\" must be an object");
        for (auto it = v->begin(); it != v->end(); ++it) {
            if (!it.value().is_string()) throw DataError("verdict for " + it.key() + " must be a string");
            std::string d = it.value().get<std::string>();
            for (auto& c : d) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
            Decision decision;
            if (d == "bot") decision = Decision::Bot;
            else if (d == "human") decision = Decision::Human;
            else throw DataError("verdict for " + it.key() + " must be \"bot\" or \"human\"");
            r.verdicts.insert_or_assign(it.key(), Verdict{decision, it.key()});
        }
    }
    if (auto label = optional_string(object, "label")) r.label = parse_label(*label);
    return r;
}

json record_to_json(const FingerprintRecord& r) {
    json out = json::object();
    out["record_id"] = r.record_id;
    out["timestamp"] = r.timestamp_ms;
    out["ip"] = r.ip;
    if (r.cookie_id) out["cookie_id"] = *r.cookie_id;
    if (r.url_token) out["url_token"] = *r.url_token;
    out["user_agent"] = r.user_agent;
    json attrs = json::object();
    for (const auto& [name, value] : r.attributes) attrs[name] = attribute_to_json(value);
    out["attributes"] = std::move(attrs);
    json verdicts = json::object();
    for (const auto& [service, v] : r.verdicts) verdicts[service] = std::string(to_string(v.decision));
    out["verdicts"] = std::move(verdicts);
    out["label"] = label_to_string(r.label);
    return out;
}

std::string record_to_line(const FingerprintRecord& record) { return record_to_json(record).dump(); }

FingerprintRecord record_from_line(std::string_view line, const AttributeRegistry& registry, const std::string& source,
                                   std::size_t line_no, Diagnostics* diagnostics) {
    const std::string fallback_id = source + ":" + std::to_string(line_no);
    json obj;
    try {
        obj = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ParseError(source, line_no, e.byte == 0 ? 1 : e.byte, "malformed JSON record");
    }
    try {
        return record_from_json(obj, registry, fallback_id, diagnostics);
    } catch (const DataError& e) {
        throw DataError(fallback_id + ": " + e.what());
    }
}

std::vector<FingerprintRecord> read_records(std::istream& in, const AttributeRegistry& registry,
                                            const std::string& source) {
    std::vector<FingerprintRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(record_from_line(line, registry, source, line_no));
    }
    return out;
}

std::vector<FingerprintRecord> read_records_file(const std::string& path, const AttributeRegistry& registry) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    return read_records(in, registry, path);
}

void write_records(std::ostream& out, const std::vector<FingerprintRecord>& records) {
    for (const auto& r : records) out << record_to_line(r) << '\n';
}

}  // namespace fpscan
