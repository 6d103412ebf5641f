#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fpscan/registry.hpp"

namespace fpscan {

struct AttributeCategory {
    std::string name;
    std::vector<std::string> attributes;

    friend bool operator==(const AttributeCategory&, const AttributeCategory&) = default;
};

/// Named groups of attributes analysed pairwise. An attribute may sit in
/// several categories. Category order follows the source file.
struct AttributeCategorySet {
    std::vector<AttributeCategory> categories;

    const AttributeCategory* find(std::string_view name) const;
    bool empty() const noexcept { return categories.empty(); }

    friend bool operator==(const AttributeCategorySet&, const AttributeCategorySet&) = default;
};

/// Parses `{ "Screen": ["ua.device", ...], ... }`. Empty or whitespace-only
/// text yields an empty set. Throws ParseError (with line/column) for
/// malformed JSON and UnknownAttributeError listing every unregistered name.
AttributeCategorySet parse_categories(std::string_view json_text, const AttributeRegistry& registry,
                                      const std::string& source = "categories");
AttributeCategorySet load_categories(const std::string& path, const AttributeRegistry& registry);
/// The shipped default (data/categories.json).
const AttributeCategorySet& default_categories();

}  // namespace fpscan
