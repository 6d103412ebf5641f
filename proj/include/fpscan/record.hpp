#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "fpscan/value.hpp"

namespace fpscan {

enum class Decision { Bot, Human };

/// One anti-bot service's decision on a request.
struct Verdict {
    Decision decision = Decision::Human;
    std::string service;

    friend bool operator==(const Verdict&, const Verdict&) = default;
};

/// Ground-truth origin of a record.
struct SourceLabel {
    enum class Kind { Bot, Human, Unknown };
    Kind kind = Kind::Unknown;
    std::string tag;  // bot service tag; empty otherwise

    static SourceLabel bot(std::string tag) { return {Kind::Bot, std::move(tag)}; }
    static SourceLabel human() { return {Kind::Human, {}}; }
    static SourceLabel unknown() { return {}; }

    bool is_bot() const noexcept { return kind == Kind::Bot; }
    bool is_human() const noexcept { return kind == Kind::Human; }

    friend bool operator==(const SourceLabel&, const SourceLabel&) = default;
};

using AttributeMap = std::map<std::string, AttributeValue, std::less<>>;
using VerdictMap = std::map<std::string, Verdict, std::less<>>;

/// One request as seen by the honey site.
struct FingerprintRecord {
    std::string record_id;
    std::int64_t timestamp_ms = 0;
    std::string ip;
    std::optional<std::string> cookie_id;
    std::optional<std::string> url_token;
    std::string user_agent;
    AttributeMap attributes;
    VerdictMap verdicts;
    SourceLabel label;

    /// Value of `name`, or Absent when the attribute was not collected.
    const AttributeValue& get(std::string_view name) const;
    void set(std::string name, AttributeValue value) { attributes.insert_or_assign(std::move(name), std::move(value)); }

    /// Decision of `service`, if that service judged the request.
    std::optional<Decision> verdict(std::string_view service) const;

    friend bool operator==(const FingerprintRecord&, const FingerprintRecord&) = default;
};

std::string_view to_string(Decision d);
std::string label_to_string(const SourceLabel& label);

}  // namespace fpscan
