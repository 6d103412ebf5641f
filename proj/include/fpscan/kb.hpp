#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fpscan/registry.hpp"
#include "fpscan/value.hpp"

namespace fpscan {

/// A list of valid values plus the set name it is published under in a
/// compiled ruleset.
struct ValidValues {
    std::vector<AttributeValue> values;
    std::string set_name;

    bool contains(const AttributeValue& v) const;
};

/// Catalog field names and the attribute each one constrains.
struct CatalogField {
    std::string_view field;      // e.g. "valid_resolutions"
    std::string_view attribute;  // e.g. "screen.resolution"
    std::string_view suffix;     // set-name suffix, e.g. "resolutions"
};
const std::vector<CatalogField>& catalog_fields();
const CatalogField* catalog_field_by_name(std::string_view field);
const CatalogField* catalog_field_for_attribute(std::string_view attribute);

/// Valid hardware for one device; keyed by attribute name.
using DeviceEntry = std::map<std::string, ValidValues, std::less<>>;

struct GeoRuleSpec {
    std::string region_attr;
    std::string zone_attr;
    std::string provenance;
};

struct RegionInfo {
    std::vector<std::string> zones;
    std::vector<std::string> languages;
};

struct SynthProfile {
    std::string name;
    std::string device;
    std::string user_agent;
    std::optional<DeviceEntry> hardware;  // used when the device is not catalogued
    nlohmann::json attributes;            // extra attributes, registry-typed on use
};

/// Plausibility catalog used to adjudicate candidates, compile rules and
/// drive the synthetic generator.
///
/// JSON strings shaped like `<w>x<h>` load as Resolution values; numbers
/// as Integer or Real. A catalog or combo entry may name a shared set as
/// "@name" instead of listing values.
class KnowledgeBase {
public:
    static KnowledgeBase parse(std::string_view json_text, const AttributeRegistry& registry,
                               const std::string& source = "kb");
    static KnowledgeBase load(const std::string& path, const AttributeRegistry& registry);
    static const KnowledgeBase& builtin();

    const std::map<std::string, std::vector<AttributeValue>, std::less<>>& sets() const noexcept { return sets_; }
    const std::vector<AttributeValue>* set(std::string_view name) const;

    const std::map<std::string, DeviceEntry, std::less<>>& devices() const noexcept { return devices_; }
    const DeviceEntry* device(std::string_view name) const;

    /// Valid values of `attr_b` given `attr_a == value_a` from valid_combos.
    const ValidValues* combo(std::string_view attr_a, std::string_view value_a, std::string_view attr_b) const;
    const std::map<std::string, std::map<std::string, ValidValues, std::less<>>, std::less<>>& combos() const noexcept {
        return combos_;
    }

    const std::vector<GeoRuleSpec>& geo_rules() const noexcept { return geo_rules_; }
    const std::map<std::string, RegionInfo, std::less<>>& regions() const noexcept { return regions_; }
    const std::vector<SynthProfile>& profiles() const noexcept { return profiles_; }
    const std::map<std::string, std::vector<AttributeValue>, std::less<>>& synth_extra_values() const noexcept {
        return extra_values_;
    }

private:
    std::map<std::string, std::vector<AttributeValue>, std::less<>> sets_;
    std::map<std::string, DeviceEntry, std::less<>> devices_;
    std::map<std::string, std::map<std::string, ValidValues, std::less<>>, std::less<>> combos_;
    std::vector<GeoRuleSpec> geo_rules_;
    std::map<std::string, RegionInfo, std::less<>> regions_;
    std::vector<SynthProfile> profiles_;
    std::map<std::string, std::vector<AttributeValue>, std::less<>> extra_values_;
};

/// Lowercase ASCII alphanumerics, everything else collapsed to '_'.
std::string slug(std::string_view text);

/// A KB literal: "WxH" strings become Resolution, numbers Integer/Real,
/// booleans Flag, other strings Text.
AttributeValue kb_literal(const nlohmann::json& value);

/// Numbers compare by value across Integer and Real; all other kinds need
/// the same kind and payload.
bool values_match(const AttributeValue& a, const AttributeValue& b);

}  // namespace fpscan
