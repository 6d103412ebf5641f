#include "fpscan/record.hpp"

namespace fpscan {

const AttributeValue& FingerprintRecord::get(std::string_view name) const {
    static const AttributeValue absent;
    auto it = attributes.find(name);
    return it == attributes.end() ? absent : it->second;
}

std::optional<Decision> FingerprintRecord::verdict(std::string_view service) const {
    auto it = verdicts.find(service);
    if (it == verdicts.end()) return std::nullopt;
    return it->second.decision;
}

std::string_view to_string(Decision d) { return d == Decision::Bot ? "bot" : "human"; }

std::string label_to_string(const SourceLabel& label) {
    switch (label.kind) {
        case SourceLabel::Kind::Bot: return label.tag.empty() ? "bot" : "bot:" + label.tag;
        case SourceLabel::Kind::Human: return "human";
        case SourceLabel::Kind::Unknown: break;
    }
    return "unknown";
}

}  // namespace fpscan
