#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fpscan/value.hpp"

namespace fpscan {

struct AttributeSpec {
    std::string name;
    ValueKind kind = ValueKind::Text;
    std::vector<std::string> aliases;
    std::string source;
};

/// Closed vocabulary of attribute names and their value kinds.
class AttributeRegistry {
public:
    /// The registry compiled from data/registry.json.
    static const AttributeRegistry& builtin();
    static AttributeRegistry parse(std::string_view json_text, const std::string& source = "registry");
    static AttributeRegistry load(const std::string& path);

    bool contains(std::string_view name) const;
    std::optional<ValueKind> kind(std::string_view name) const;
    /// Maps an alias (e.g. a FingerprintJS component name) to its attribute.
    std::optional<std::string_view> resolve_alias(std::string_view alias) const;
    const std::vector<AttributeSpec>& attributes() const noexcept { return specs_; }

private:
    std::vector<AttributeSpec> specs_;
    std::map<std::string, std::size_t, std::less<>> by_name_;
    std::map<std::string, std::size_t, std::less<>> by_alias_;
};

}  // namespace fpscan
