#include "fpscan/kb.hpp"

#include <regex>
#include <set>

#include "fpscan/embedded.hpp"
#include "fpscan/error.hpp"
#include "fpscan/io.hpp"

namespace fpscan {

namespace {

using json = nlohmann::json;

const std::vector<CatalogField> kCatalogFields = {
    {"valid_resolutions", "screen.resolution", "resolutions"},
    {"touch_required", "touch_support", "touch_support"},
    {"max_touch_points", "max_touch_points", "max_touch_points"},
    {"valid_concurrency", "hardware.concurrency", "concurrency"},
    {"valid_memory", "device.memory", "memory"},
    {"valid_color_depth", "color_depth", "color_depth"},
    {"valid_color_gamut", "color_gamut", "color_gamut"},
};

class Loader {
public:
    Loader(const AttributeRegistry& registry, std::string source) : registry_(registry), source_(std::move(source)) {}

    [[noreturn]] void fail(const std::string& where, const std::string& msg) const {
        throw DataError(source_ + ": " + where + ": " + msg);
    }

    void require_attribute(const std::string& where, const std::string& name) const {
        if (!registry_.contains(name)) throw UnknownAttributeError({name});
        (void)where;
    }

    std::vector<AttributeValue> literals(const std::string& where, const json& j) const {
        if (!j.is_array()) fail(where, "expected a list of values");
        std::vector<AttributeValue> out;
        for (const auto& e : j) {
            if (!e.is_string() && !e.is_number() && !e.is_boolean()) fail(where, "unsupported value " + e.dump());
            out.push_back(kb_literal(e));
        }
        return out;
    }

    ValidValues valid_values(const std::string& where, const json& j, std::string default_name,
                             const std::map<std::string, std::vector<AttributeValue>, std::less<>>& sets) const {
        if (j.is_string()) {
            auto ref = j.get<std::string>();
            if (ref.size() < 2 || ref.front() != '@') fail(where, "expected a list or an @set reference");
            auto it = sets.find(std::string_view(ref).substr(1));
            if (it == sets.end()) fail(where, "undefined set " + ref);
            return {it->second, it->first};
        }
        return {literals(where, j), std::move(default_name)};
    }

    DeviceEntry device_entry(const std::string& name, const json& j,
                             const std::map<std::string, std::vector<AttributeValue>, std::less<>>& sets) const {
        if (!j.is_object()) fail("devices/" + name, "expected an object");
        DeviceEntry entry;
        for (const auto& [field, value] : j.items()) {
            const auto* spec = catalog_field_by_name(field);
            std::string where = "devices/" + name + "/" + field;
            if (!spec) fail(where, "unknown catalog field");
            std::string set_name = slug(name) + "_" + std::string(spec->suffix);
            if (field == "touch_required") {
                if (!value.is_boolean()) fail(where, "expected true or false");
                entry[std::string(spec->attribute)] =
                    ValidValues{{AttributeValue::text(value.get<bool>() ? "touchEvent/touchStart" : "None")}, set_name};
            } else {
                entry[std::string(spec->attribute)] = valid_values(where, value, set_name, sets);
            }
        }
        return entry;
    }

private:
    const AttributeRegistry& registry_;
    std::string source_;
};

}  // namespace

bool ValidValues::contains(const AttributeValue& v) const {
    for (const auto& x : values)
        if (values_match(x, v)) return true;
    return false;
}

const std::vector<CatalogField>& catalog_fields() { return kCatalogFields; }

const CatalogField* catalog_field_by_name(std::string_view field) {
    for (const auto& f : kCatalogFields)
        if (f.field == field) return &f;
    return nullptr;
}

const CatalogField* catalog_field_for_attribute(std::string_view attribute) {
    for (const auto& f : kCatalogFields)
        if (f.attribute == attribute) return &f;
    return nullptr;
}

std::string slug(std::string_view text) {
    std::string out;
    bool pending = false;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            if (pending && !out.empty()) out += '_';
            pending = false;
            out += static_cast<char>(std::tolower(c));
        } else {
            pending = true;
        }
    }
    return out.empty() ? "_" : out;
}

AttributeValue kb_literal(const json& value) {
    if (value.is_boolean()) return AttributeValue::flag(value.get<bool>());
    if (value.is_number_integer() || value.is_number_unsigned()) return AttributeValue::integer(value.get<std::int64_t>());
    if (value.is_number_float()) return AttributeValue::real(value.get<double>());
    if (value.is_string()) {
        static const std::regex res(R"(^([1-9][0-9]{0,8})x([1-9][0-9]{0,8})$)");
        const auto& s = value.get_ref<const std::string&>();
        std::smatch m;
        if (std::regex_match(s, m, res))
            return AttributeValue::resolution(static_cast<std::uint32_t>(std::stoul(m[1])),
                                              static_cast<std::uint32_t>(std::stoul(m[2])));
        return AttributeValue::text(s);
    }
    throw DataError("unsupported knowledge-base value " + value.dump());
}

bool values_match(const AttributeValue& a, const AttributeValue& b) {
    auto na = a.as_number();
    auto nb = b.as_number();
    if (na && nb) return *na == *nb;
    return a == b;
}

KnowledgeBase KnowledgeBase::parse(std::string_view json_text, const AttributeRegistry& registry,
                                   const std::string& source) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        auto [line, col] = line_column(json_text, e.byte == 0 ? 0 : e.byte - 1);
        throw ParseError(source, line, col, "malformed JSON");
    }
    if (!doc.is_object()) throw DataError(source + ": expected a JSON object");
    Loader load(registry, source);
    KnowledgeBase kb;

    if (auto it = doc.find("sets"); it != doc.end()) {
        if (!it->is_object()) load.fail("sets", "expected an object");
        for (const auto& [name, values] : it->items()) kb.sets_[name] = load.literals("sets/" + name, values);
    }
    if (auto it = doc.find("devices"); it != doc.end()) {
        if (!it->is_object()) load.fail("devices", "expected an object");
        for (const auto& [name, entry] : it->items()) kb.devices_[name] = load.device_entry(name, entry, kb.sets_);
    }
    if (auto it = doc.find("valid_combos"); it != doc.end()) {
        if (!it->is_object()) load.fail("valid_combos", "expected an object");
        for (const auto& [key, table] : it->items()) {
            auto bar = key.find('|');
            if (bar == std::string::npos) load.fail("valid_combos/" + key, "key must be <attr_a>|<attr_b>");
            std::string a = key.substr(0, bar), b = key.substr(bar + 1);
            load.require_attribute(key, a);
            load.require_attribute(key, b);
            if (!table.is_object()) load.fail("valid_combos/" + key, "expected an object");
            auto& dest = kb.combos_[key];
            for (const auto& [value, valid] : table.items())
                dest[value] = load.valid_values("valid_combos/" + key + "/" + value, valid, slug(value) + "_" + slug(b),
                                                kb.sets_);
        }
    }
    if (auto it = doc.find("geo_rules"); it != doc.end()) {
        for (const auto& g : *it) {
            GeoRuleSpec spec{g.at("region_attr").get<std::string>(), g.at("zone_attr").get<std::string>(),
                             g.value("provenance", std::string("KB/geo-offsets"))};
            load.require_attribute("geo_rules", spec.region_attr);
            load.require_attribute("geo_rules", spec.zone_attr);
            kb.geo_rules_.push_back(std::move(spec));
        }
    }
    if (auto it = doc.find("regions"); it != doc.end()) {
        for (const auto& [name, info] : it->items()) {
            RegionInfo r;
            r.zones = info.at("zones").get<std::vector<std::string>>();
            r.languages = info.value("languages", std::vector<std::string>{});
            if (r.zones.empty()) load.fail("regions/" + name, "needs at least one zone");
            kb.regions_[name] = std::move(r);
        }
    }
    if (auto it = doc.find("profiles"); it != doc.end()) {
        for (const auto& p : *it) {
            SynthProfile profile;
            profile.name = p.at("name").get<std::string>();
            profile.device = p.at("device").get<std::string>();
            profile.user_agent = p.at("user_agent").get<std::string>();
            if (p.contains("hardware")) profile.hardware = load.device_entry(profile.name, p["hardware"], kb.sets_);
            profile.attributes = p.value("attributes", json::object());
            for (const auto& [name, value] : profile.attributes.items()) load.require_attribute("profiles", name);
            if (!profile.hardware && !kb.device(profile.device))
                load.fail("profiles/" + profile.name, "device " + profile.device + " is not in the catalog");
            kb.profiles_.push_back(std::move(profile));
        }
    }
    if (auto it = doc.find("synth_extra_values"); it != doc.end()) {
        for (const auto& [name, values] : it->items()) {
            load.require_attribute("synth_extra_values", name);
            kb.extra_values_[name] = load.literals("synth_extra_values/" + name, values);
        }
    }

    // Published set names must not collide with different contents.
    std::map<std::string, const std::vector<AttributeValue>*> published;
    auto publish = [&](const ValidValues& v, const std::string& where) {
        auto [pos, inserted] = published.emplace(v.set_name, &v.values);
        if (!inserted && *pos->second != v.values) load.fail(where, "set name @" + v.set_name + " is ambiguous");
    };
    for (const auto& [name, values] : kb.sets_) published.emplace(name, &values);
    for (const auto& [device, entry] : kb.devices_)
        for (const auto& [attr, v] : entry) publish(v, "devices/" + device);
    for (const auto& [key, table] : kb.combos_)
        for (const auto& [value, v] : table) publish(v, "valid_combos/" + key + "/" + value);
    return kb;
}

KnowledgeBase KnowledgeBase::load(const std::string& path, const AttributeRegistry& registry) {
    return parse(read_file(path), registry, path);
}

const KnowledgeBase& KnowledgeBase::builtin() {
    static const KnowledgeBase kb = parse(*embedded_data("kb.json"), AttributeRegistry::builtin(), "builtin:kb.json");
    return kb;
}

const std::vector<AttributeValue>* KnowledgeBase::set(std::string_view name) const {
    auto it = sets_.find(name);
    return it == sets_.end() ? nullptr : &it->second;
}

const DeviceEntry* KnowledgeBase::device(std::string_view name) const {
    auto it = devices_.find(name);
    return it == devices_.end() ? nullptr : &it->second;
}

const ValidValues* KnowledgeBase::combo(std::string_view attr_a, std::string_view value_a,
                                        std::string_view attr_b) const {
    std::string key;
    key.reserve(attr_a.size() + attr_b.size() + 1);
    key.append(attr_a).append("|").append(attr_b);
    auto it = combos_.find(key);
    if (it == combos_.end()) return nullptr;
    auto jt = it->second.find(value_a);
    return jt == it->second.end() ? nullptr : &jt->second;
}

}  // namespace fpscan
