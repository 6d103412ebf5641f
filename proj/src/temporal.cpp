#include "fpscan/temporal.hpp"

#include <algorithm>

#include <json.hpp>

#include "fpscan/error.hpp"

namespace fpscan {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr std::string_view kFormat = "fpscan-temporal-state";
constexpr int kVersion = 1;

template <class Map>
std::vector<typename Map::const_pointer> sorted_entries(const Map& m) {
    std::vector<typename Map::const_pointer> out;
    out.reserve(m.size());
    for (const auto& kv : m) out.push_back(&kv);
    std::sort(out.begin(), out.end(), [](auto a, auto b) { return a->first < b->first; });
    return out;
}

}  // namespace

TemporalConfig TemporalConfig::from_directives(const std::vector<TemporalDirective>& directives) {
    TemporalConfig c;
    c.cookie_attrs.clear();
    c.ip_timezone = false;
    c.ip_region = false;
    for (const auto& d : directives) {
        if (d.key == KeyKind::Cookie) {
            if (std::find(c.cookie_attrs.begin(), c.cookie_attrs.end(), d.watch) == c.cookie_attrs.end())
                c.cookie_attrs.push_back(d.watch);
        } else if (d.watch == "timezone" || d.watch == "timezone.offsets") {
            c.ip_timezone = true;
        } else if (d.watch == "geolocation.region") {
            c.ip_region = true;
        } else {
            throw DataError("unsupported IP-keyed watch '" + d.watch + "' (expected timezone or geolocation.region)");
        }
    }
    return c;
}

std::vector<TemporalFlag> TemporalState::observe(const FingerprintRecord& record) {
    std::vector<TemporalFlag> flags;
    if (!started_) {
        created_at_ = record.timestamp_ms;
        started_ = true;
    }
    updated_at_ = std::max(updated_at_, record.timestamp_ms);
    auto expired = [&](std::int64_t last_seen) {
        return config_.ttl_ms && record.timestamp_ms - last_seen > *config_.ttl_ms;
    };

    if (record.cookie_id && !config_.cookie_attrs.empty()) {
        auto& hist = cookies_[*record.cookie_id];
        if (expired(hist.last_seen)) hist.values.clear();
        hist.last_seen = record.timestamp_ms;
        for (const auto& attr : config_.cookie_attrs) {
            std::string value = canonical_serialize(record.get(attr));
            auto& seen = hist.values[attr];
            if (seen.count(value)) continue;
            if (!seen.empty())
                flags.push_back({record.record_id, KeyKind::Cookie, attr, {seen.begin(), seen.end()}, value});
            seen.insert(std::move(value));
        }
    }

    if (!record.ip.empty() && (config_.ip_timezone || config_.ip_region)) {
        auto offsets = config_.ip_timezone ? OffsetSet::from_value(record.get("timezone.offsets")) : std::nullopt;
        const auto* region = config_.ip_region ? record.get("geolocation.region").as_text() : nullptr;
        bool has_offsets = offsets && !offsets->empty();
        if (has_offsets || region) {
            auto& hist = ips_[record.ip];
            if (expired(hist.last_seen)) hist = IpHistory{};
            hist.last_seen = record.timestamp_ms;
            if (has_offsets) {
                std::string text = offsets->to_string();
                if (!hist.offsets.empty() && !hist.offsets.intersects(*offsets))
                    flags.push_back({record.record_id, KeyKind::Ip, "timezone",
                                     {hist.offset_sets.begin(), hist.offset_sets.end()}, text});
                hist.offsets.merge(*offsets);
                hist.offset_sets.insert(std::move(text));
            }
            if (region && !hist.regions.count(*region)) {
                if (!hist.regions.empty())
                    flags.push_back({record.record_id, KeyKind::Ip, "geolocation.region",
                                     {hist.regions.begin(), hist.regions.end()}, *region});
                hist.regions.insert(*region);
            }
        }
    }
    return flags;
}

std::string TemporalState::snapshot() const {
    ojson cookies = ojson::array();
    for (const auto* kv : sorted_entries(cookies_)) {
        ojson values = ojson::object();
        for (const auto& [attr, set] : kv->second.values) values[attr] = set;
        cookies.push_back(ojson{{"key", kv->first}, {"last_seen", kv->second.last_seen}, {"values", values}});
    }
    ojson ips = ojson::array();
    for (const auto* kv : sorted_entries(ips_)) {
        ips.push_back(ojson{{"key", kv->first},
                            {"last_seen", kv->second.last_seen},
                            {"offset_sets", kv->second.offset_sets},
                            {"regions", kv->second.regions}});
    }
    ojson config{{"cookie_attrs", config_.cookie_attrs},
                 {"ip_timezone", config_.ip_timezone},
                 {"ip_region", config_.ip_region},
                 {"ttl_ms", config_.ttl_ms ? ojson(*config_.ttl_ms) : ojson(nullptr)}};
    ojson doc{{"format", kFormat},         {"version", kVersion},  {"started", started_},
              {"created_at", created_at_}, {"updated_at", updated_at_}, {"config", config},
              {"cookies", cookies},        {"ips", ips}};
    return doc.dump() + "\n";
}

TemporalState TemporalState::restore(std::string_view bytes) {
    json doc;
    try {
        doc = json::parse(bytes);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("corrupt temporal snapshot: ") + e.what());
    }
    try {
        if (!doc.is_object() || doc.value("format", "") != kFormat)
            throw DataError("corrupt temporal snapshot: not a temporal state");
        if (doc.at("version").get<int>() != kVersion)
            throw DataError("unsupported temporal snapshot version " + doc.at("version").dump());
        TemporalState s;
        const auto& c = doc.at("config");
        s.config_.cookie_attrs = c.at("cookie_attrs").get<std::vector<std::string>>();
        s.config_.ip_timezone = c.at("ip_timezone").get<bool>();
        s.config_.ip_region = c.at("ip_region").get<bool>();
        if (!c.at("ttl_ms").is_null()) s.config_.ttl_ms = c.at("ttl_ms").get<std::int64_t>();
        s.started_ = doc.at("started").get<bool>();
        s.created_at_ = doc.at("created_at").get<std::int64_t>();
        s.updated_at_ = doc.at("updated_at").get<std::int64_t>();
        for (const auto& e : doc.at("cookies")) {
            CookieHistory h;
            h.last_seen = e.at("last_seen").get<std::int64_t>();
            for (const auto& [attr, values] : e.at("values").items())
                h.values[attr] = values.get<std::set<std::string>>();
            if (!s.cookies_.emplace(e.at("key").get<std::string>(), std::move(h)).second)
                throw DataError("corrupt temporal snapshot: duplicate cookie key");
        }
        for (const auto& e : doc.at("ips")) {
            IpHistory h;
            h.last_seen = e.at("last_seen").get<std::int64_t>();
            h.offset_sets = e.at("offset_sets").get<std::set<std::string>>();
            for (const auto& text : h.offset_sets) h.offsets.merge(OffsetSet::parse(text));
            h.regions = e.at("regions").get<std::set<std::string>>();
            if (!s.ips_.emplace(e.at("key").get<std::string>(), std::move(h)).second)
                throw DataError("corrupt temporal snapshot: duplicate ip key");
        }
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("corrupt temporal snapshot: ") + e.what());
    } catch (const DataError&) {
        throw;
    } catch (const Error& e) {
        throw DataError(std::string("corrupt temporal snapshot: ") + e.what());
    }
}

std::vector<TemporalFlag> observe(TemporalState& state, const FingerprintRecord& record) {
    return state.observe(record);
}

}  // namespace fpscan
