#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "fpscan/registry.hpp"
#include "fpscan/value.hpp"

namespace fpscan {

enum class CompareOp { Eq, Ne, Lt, Gt };

struct Compare {
    std::string attr;
    CompareOp op = CompareOp::Eq;
    AttributeValue value;
    friend bool operator==(const Compare&, const Compare&) = default;
};

/// Inclusive numeric range.
struct Between {
    std::string attr;
    AttributeValue low;
    AttributeValue high;
    friend bool operator==(const Between&, const Between&) = default;
};

struct Membership {
    std::string attr;
    bool negated = false;
    std::string set;  // without '@'
    friend bool operator==(const Membership&, const Membership&) = default;
};

struct Presence {
    std::string attr;
    bool present = true;
    friend bool operator==(const Presence&, const Presence&) = default;
};

/// True when `<region_attr>.offsets` and `<zone_attr>.offsets` are both
/// present and share no UTC offset.
struct OffsetsDisjoint {
    std::string region_attr;
    std::string zone_attr;
    friend bool operator==(const OffsetsDisjoint&, const OffsetsDisjoint&) = default;
};

using Atom = std::variant<Compare, Between, Membership, Presence, OffsetsDisjoint>;

enum class RuleKind { Spatial, Geo, Temporal };
enum class KeyKind { Cookie, Ip };

struct TemporalDirective {
    KeyKind key = KeyKind::Cookie;
    std::string watch;
    friend bool operator==(const TemporalDirective&, const TemporalDirective&) = default;
};

/// One filter-list line. Spatial and Geo rules are a conjunction of atoms;
/// Temporal rules carry a directive and no atoms. The action is always
/// "flag as bot".
struct FilterRule {
    std::string id;
    RuleKind kind = RuleKind::Spatial;
    std::vector<Atom> atoms;
    std::optional<TemporalDirective> directive;
    std::string provenance;

    friend bool operator==(const FilterRule&, const FilterRule&) = default;
};

struct RuleSet {
    std::map<std::string, std::vector<AttributeValue>, std::less<>> sets;
    std::vector<FilterRule> rules;

    const FilterRule* find(std::string_view id) const;
    std::size_t count(RuleKind kind) const;
    std::vector<TemporalDirective> temporal_directives() const;

    friend bool operator==(const RuleSet&, const RuleSet&) = default;
};

std::string_view to_string(RuleKind kind);
std::string_view to_string(KeyKind kind);
std::string_view to_string(CompareOp op);

/// Parses the filter-list format:
///
///   # comment
///   set @name: literal, literal, ...
///   <spatial|geo|temporal> <id> [(provenance)] : <body>
///
/// Spatial/geo body: atoms joined by AND. Atoms:
///   attr == lit | attr != lit | attr < num | attr > num
///   attr BETWEEN num num | attr IN @set | attr NOT IN @set
///   attr ABSENT | attr PRESENT | offsets_disjoint(attr, attr)
/// Literals: "quoted" (escapes \" \\ \n \t \r), integers, reals,
/// <w>x<h>, true, false.
/// Temporal body: key=cookie watch=<attr> | key=ip watch=<attr>.
///
/// Throws ParseError with line, column and the expected tokens. Sets may
/// be declared after use. Attribute names must be registered.
RuleSet parse_rules(std::string_view text, const AttributeRegistry& registry = AttributeRegistry::builtin(),
                    const std::string& source = "rules");
RuleSet load_rules(const std::string& spec, const AttributeRegistry& registry = AttributeRegistry::builtin());

/// Sets first (by name), then rules in order. parse_rules(serialize_rules(rs)) == rs.
std::string serialize_rules(const RuleSet& rules);
std::string serialize_rule(const FilterRule& rule);
std::string serialize_atom(const Atom& atom);
std::string serialize_literal(const AttributeValue& value);

/// Rule ids dropped and set references replaced by their sorted contents;
/// equal for rulesets that differ only in naming and order.
std::vector<std::string> canonical_rule_forms(const RuleSet& rules);

}  // namespace fpscan
