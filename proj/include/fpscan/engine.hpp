#pragma once

#include <functional>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "fpscan/record.hpp"
#include "fpscan/rules.hpp"
#include "fpscan/temporal.hpp"

namespace fpscan {

/// Hash-backed membership over rule literals. Numbers match by value
/// across Integer and Real.
class ValueSet {
public:
    explicit ValueSet(const std::vector<AttributeValue>& values);
    bool contains(const AttributeValue& v) const;

private:
    std::unordered_set<std::string> texts_;
    std::unordered_set<double> numbers_;
    std::unordered_set<std::uint64_t> resolutions_;
    bool has_true_ = false;
    bool has_false_ = false;
};

/// Three-valued atom semantics collapsed to bool: an atom over an Absent
/// attribute is false, except `ABSENT`.
bool atom_matches(const Atom& atom, const FingerprintRecord& record, const RuleSet& rules);
bool rule_matches(const FilterRule& rule, const FingerprintRecord& record, const RuleSet& rules);

/// Conservative geo check: ip.location offsets and timezone offsets both
/// present and disjoint.
bool match_geo(const FingerprintRecord& record);
bool offsets_disjoint(const FingerprintRecord& record, std::string_view region_attr, std::string_view zone_attr);

/// Compiled, immutable matcher for the spatial and geo rules of a RuleSet.
/// Rules whose first Text equality is on an attribute are indexed by that
/// value, so a record is only tested against rules it can match.
class RuleEngine {
public:
    explicit RuleEngine(const RuleSet& rules);
    ~RuleEngine();
    RuleEngine(RuleEngine&&) noexcept;
    RuleEngine& operator=(RuleEngine&&) noexcept;

    /// Indices into rules() of matching spatial and geo rules, ascending.
    void match(const FingerprintRecord& record, std::vector<std::size_t>& out) const;
    std::vector<std::string> match_spatial(const FingerprintRecord& record) const;
    std::vector<std::string> match_geo_rules(const FingerprintRecord& record) const;

    const std::vector<FilterRule>& rules() const noexcept;
    const std::vector<TemporalDirective>& temporal() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct DetectionDecision {
    std::string record_id;
    bool is_bot_by_rules = false;
    std::vector<std::string> matched;  // spatial and geo rule ids, rule order
    std::vector<TemporalFlag> temporal_flags;
    bool geo_flag = false;
    bool spatial_flag = false;  // a spatial rule matched

    friend bool operator==(const DetectionDecision&, const DetectionDecision&) = default;
};

/// Combined verdict for one record; updates `state` when the ruleset has
/// temporal directives. A ruleset without temporal directives never
/// produces temporal flags.
DetectionDecision evaluate_record(const RuleEngine& engine, TemporalState& state, const FingerprintRecord& record);

/// Orders records by (timestamp, record_id) as detection expects.
void sort_for_detection(std::vector<FingerprintRecord>& records);

/// Sorts a copy of the records, then evaluates each. The state's config is
/// replaced by the ruleset's temporal directives.
std::vector<DetectionDecision> detect(const RuleEngine& engine, TemporalState& state,
                                      std::vector<FingerprintRecord> records);

struct DetectStats {
    std::size_t records = 0;
    double index_seconds = 0;     // first pass: ids and timestamps
    double parse_seconds = 0;     // second pass: building records
    double evaluate_seconds = 0;  // rule matching and temporal state
};

/// Detection over normalized JSONL held in memory. Lines are indexed by
/// (timestamp, record_id) first and then parsed one at a time in that
/// order, so memory holds the text plus a small index rather than every
/// record. Decisions reach `sink` in detection order.
DetectStats detect_jsonl(const RuleEngine& engine, TemporalState& state, std::string_view jsonl,
                         const std::function<void(const DetectionDecision&)>& sink,
                         const std::string& source = "records",
                         const AttributeRegistry& registry = AttributeRegistry::builtin());

nlohmann::ordered_json decision_to_json(const DetectionDecision& d);
DetectionDecision decision_from_json(const nlohmann::json& j);
std::string decision_to_line(const DetectionDecision& d);
std::vector<DetectionDecision> read_decisions(std::istream& in, const std::string& source = "decisions");

}  // namespace fpscan
