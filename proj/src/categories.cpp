#include "fpscan/categories.hpp"

#include <algorithm>
#include <json.hpp>

#include "fpscan/embedded.hpp"
#include "fpscan/error.hpp"
#include "fpscan/io.hpp"

namespace fpscan {

const AttributeCategory* AttributeCategorySet::find(std::string_view name) const {
    for (const auto& c : categories)
        if (c.name == name) return &c;
    return nullptr;
}

AttributeCategorySet parse_categories(std::string_view json_text, const AttributeRegistry& registry,
                                      const std::string& source) {
    AttributeCategorySet out;
    if (std::all_of(json_text.begin(), json_text.end(), [](unsigned char c) { return std::isspace(c); }))
        return out;

    nlohmann::ordered_json doc;
    try {
        doc = nlohmann::ordered_json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        auto [line, col] = line_column(json_text, e.byte == 0 ? 0 : e.byte - 1);
        throw ParseError(source, line, col, "malformed category JSON");
    }
    if (!doc.is_object()) throw ParseError(source, 1, 1, "category file must be a JSON object");

    std::vector<std::string> unknown;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (!it.value().is_array())
            throw DataError(source + ": category " + it.key() + " must map to an array of names");
        AttributeCategory cat{it.key(), {}};
        for (const auto& name : it.value()) {
            if (!name.is_string()) throw DataError(source + ": category " + it.key() + " has a non-string entry");
            auto s = name.get<std::string>();
            if (!registry.contains(s) && std::find(unknown.begin(), unknown.end(), s) == unknown.end())
                unknown.push_back(s);
            cat.attributes.push_back(std::move(s));
        }
        out.categories.push_back(std::move(cat));
    }
    if (!unknown.empty()) throw UnknownAttributeError(std::move(unknown));
    return out;
}

AttributeCategorySet load_categories(const std::string& path, const AttributeRegistry& registry) {
    return parse_categories(read_file(path), registry, path);
}

const AttributeCategorySet& default_categories() {
    static const AttributeCategorySet set = parse_categories(
        *embedded_data("categories.json"), AttributeRegistry::builtin(), "builtin:categories.json");
    return set;
}

}  // namespace fpscan
