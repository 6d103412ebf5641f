#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpscan/discovery.hpp"
#include "fpscan/kb.hpp"
#include "fpscan/rules.hpp"

namespace fpscan {

/// What makes attr_b inconsistent given attr_a == value_a.
///
///   eq                value_b equals `values[0]`
///   in / not_in       value_b in (not in) `values`, the KB set `set`, the
///                     device catalog field `catalog`, or the valid_combos
///                     entry for (attr_a, value_a, attr_b) when `combo`
///   range             low <= value_b <= high
///   lt / gt           value_b < low / value_b > low
///   offsets_disjoint  UTC offsets of the two attributes do not overlap
struct ValuePredicate {
    enum class Op { Eq, In, NotIn, Range, Lt, Gt, OffsetsDisjoint };
    Op op = Op::Eq;
    std::vector<AttributeValue> values;
    std::string set;
    std::string catalog;
    bool combo = false;
    AttributeValue low;
    AttributeValue high;

    friend bool operator==(const ValuePredicate&, const ValuePredicate&) = default;
};

nlohmann::ordered_json predicate_to_json(const ValuePredicate& p);
ValuePredicate predicate_from_json(const nlohmann::json& j);

/// A confirmed inconsistency awaiting compilation.
struct Finding {
    std::string attr_a;
    AttributeValue value_a;
    std::string attr_b;
    ValuePredicate predicate;
    std::string provenance;

    friend bool operator==(const Finding&, const Finding&) = default;
};

struct FindingsFile {
    std::vector<Finding> spatial;
    std::vector<TemporalDirective> temporal;

    friend bool operator==(const FindingsFile&, const FindingsFile&) = default;
};

nlohmann::ordered_json findings_to_json(const FindingsFile& f);
FindingsFile findings_from_json(const nlohmann::json& j, const AttributeRegistry& registry = AttributeRegistry::builtin());

/// Cookie watches on concurrency, memory and platform plus IP watches on
/// timezone and geolocation.region.
std::vector<TemporalDirective> default_temporal_findings();

enum class Verdict3 { Inconsistent, Consistent, Unknown };

struct AdjudicationEntry {
    std::string attr_a;
    AttributeValue value_a;
    std::string attr_b;
    ValuePredicate predicate;
    Verdict3 verdict = Verdict3::Unknown;
    std::string note;

    friend bool operator==(const AdjudicationEntry&, const AdjudicationEntry&) = default;
};

/// Reviewer decisions for one category's candidate report.
struct Adjudication {
    std::string category;
    std::vector<AdjudicationEntry> entries;

    friend bool operator==(const Adjudication&, const Adjudication&) = default;
};

/// `{"adjudications": [{"category": ..., "entries": [...]}, ...]}`; a
/// single adjudication object is accepted too.
std::vector<Adjudication> adjudications_from_json(const nlohmann::json& j,
                                                  const AttributeRegistry& registry = AttributeRegistry::builtin());
nlohmann::ordered_json adjudications_to_json(const std::vector<Adjudication>& a);

struct AdjudicationResult {
    std::vector<Finding> findings;
    /// Unknown entries that the report still contains; they go back into
    /// the next review round.
    std::vector<AdjudicationEntry> pending;
    /// Entries whose (attr_a, value_a, attr_b) tuple is not in the report.
    std::size_t unmatched = 0;
};

/// Inconsistent entries matching a report tuple become findings. Throws
/// DataError when an entry names an attribute outside the report's
/// category, or the categories differ.
AdjudicationResult apply_adjudication(const CandidateReport& report, const Adjudication& adjudication);

/// Every Inconsistent entry, without a report.
std::vector<Finding> adjudication_findings(const Adjudication& adjudication);

/// Knowledge-base adjudication: a tuple whose observed attr_b values leave
/// the catalog (attr_a = ua.device) or the valid_combos table yields a
/// not_in finding. Location pairs covered by a KB geo rule are left to it.
std::vector<Finding> kb_adjudicate(const CandidateReport& report, const KnowledgeBase& kb);

/// Findings to a RuleSet. Findings are deduplicated and sorted, spatial
/// rules are numbered r001.., KB geo rules g001.., temporal directives
/// t001... offsets_disjoint findings fold into the KB geo rules. Throws
/// DataError when a finding needs a catalog entry or set the KB lacks.
RuleSet compile(const FindingsFile& findings, const KnowledgeBase& kb,
                const AttributeRegistry& registry = AttributeRegistry::builtin());

}  // namespace fpscan
