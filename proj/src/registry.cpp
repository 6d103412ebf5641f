#include "fpscan/registry.hpp"

#include <json.hpp>

#include "fpscan/embedded.hpp"
#include "fpscan/error.hpp"
#include "fpscan/io.hpp"

namespace fpscan {

const AttributeRegistry& AttributeRegistry::builtin() {
    static const AttributeRegistry registry = parse(*embedded_data("registry.json"), "builtin:registry.json");
    return registry;
}

AttributeRegistry AttributeRegistry::parse(std::string_view json_text, const std::string& source) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        auto [line, col] = line_column(json_text, e.byte == 0 ? 0 : e.byte - 1);
        throw ParseError(source, line, col, "malformed registry JSON");
    }
    AttributeRegistry reg;
    try {
        for (const auto& entry : doc.at("attributes")) {
            AttributeSpec spec;
            spec.name = entry.at("name").get<std::string>();
            auto kind = parse_value_kind(entry.at("kind").get<std::string>());
            if (!kind || *kind == ValueKind::Absent)
                throw DataError(source + ": attribute " + spec.name + " has an invalid kind");
            spec.kind = *kind;
            if (entry.contains("aliases")) spec.aliases = entry["aliases"].get<std::vector<std::string>>();
            spec.source = entry.value("source", "");
            if (reg.by_name_.count(spec.name)) throw DataError(source + ": duplicate attribute " + spec.name);
            auto index = reg.specs_.size();
            reg.by_name_.emplace(spec.name, index);
            for (const auto& alias : spec.aliases) reg.by_alias_.emplace(alias, index);
            reg.specs_.push_back(std::move(spec));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(source + ": " + e.what());
    }
    return reg;
}

AttributeRegistry AttributeRegistry::load(const std::string& path) { return parse(read_file(path), path); }

bool AttributeRegistry::contains(std::string_view name) const { return by_name_.find(name) != by_name_.end(); }

std::optional<ValueKind> AttributeRegistry::kind(std::string_view name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) return std::nullopt;
    return specs_[it->second].kind;
}

std::optional<std::string_view> AttributeRegistry::resolve_alias(std::string_view alias) const {
    auto it = by_alias_.find(alias);
    if (it == by_alias_.end()) return std::nullopt;
    return specs_[it->second].name;
}

}  // namespace fpscan
