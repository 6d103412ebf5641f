#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "fpscan/categories.hpp"
#include "fpscan/record.hpp"
#include "fpscan/registry.hpp"

namespace fpscan {

/// Which rows take part in pair counting.
///   EvadedOnly  bot-labeled rows the baseline service judged Human
///   AllBots     every bot-labeled row
///   All         every row
enum class FilterMode { EvadedOnly, AllBots, All };

std::string_view to_string(FilterMode mode);
std::optional<FilterMode> parse_filter_mode(std::string_view text);

struct RowFilter {
    FilterMode mode = FilterMode::EvadedOnly;
    /// Baseline service for EvadedOnly. Empty: a row counts as evaded when
    /// any service judged it Human.
    std::string baseline_service;

    bool accepts(const FingerprintRecord& record) const;
};

struct ValueSupport {
    AttributeValue value;
    std::uint64_t support = 0;

    friend bool operator==(const ValueSupport&, const ValueSupport&) = default;
};

/// Distinct values of attr_b seen alongside one value of attr_a.
/// values_b is ordered by canonical serialization.
struct PairCount {
    std::string attr_a;
    AttributeValue value_a;
    std::string attr_b;
    std::uint64_t distinct_b = 0;
    std::vector<ValueSupport> values_b;
    std::uint64_t support_a = 0;

    friend bool operator==(const PairCount&, const PairCount&) = default;
};

struct CountOptions {
    RowFilter filter;
    /// Group rows whose attr_a is Absent under the Absent key.
    bool include_absent_a = false;
};

/// Mergeable group-by for one ordered attribute pair. Values are interned
/// per column so the hot path hashes 64-bit ids, not strings.
class PairAccumulator {
public:
    PairAccumulator(std::string attr_a, std::string attr_b, bool include_absent_a = false);

    void add(const FingerprintRecord& record);
    /// Folds `other` (same attribute pair) into this accumulator.
    void merge(const PairAccumulator& other);
    std::vector<PairCount> result() const;

    const std::string& attr_a() const noexcept { return attr_a_; }
    const std::string& attr_b() const noexcept { return attr_b_; }

private:
    struct Column {
        std::unordered_map<std::string, std::uint32_t> ids;
        std::vector<AttributeValue> values;
        std::vector<std::string> keys;
        std::uint32_t intern(const AttributeValue& v);
        std::uint32_t intern_key(const std::string& key, const AttributeValue& v);
    };

    std::string attr_a_;
    std::string attr_b_;
    bool include_absent_a_;
    Column col_a_;
    Column col_b_;
    std::unordered_map<std::uint64_t, std::uint64_t> pairs_;  // (id_a << 32 | id_b) -> rows
};

/// Exact group-by of attr_b values per attr_a value, in no particular
/// order. Throws UnknownAttributeError when either name is unregistered.
std::vector<PairCount> count_pairs(const std::vector<FingerprintRecord>& records, const std::string& attr_a,
                                   const std::string& attr_b, const CountOptions& options = {},
                                   const AttributeRegistry& registry = AttributeRegistry::builtin());

struct CandidateReport {
    std::string category;
    std::vector<std::string> attributes;
    std::vector<PairCount> pairs;
    std::string dataset_digest;
    FilterMode filter_mode = FilterMode::EvadedOnly;

    friend bool operator==(const CandidateReport&, const CandidateReport&) = default;
};

struct DiscoverOptions {
    CountOptions count;
    std::uint64_t min_support = 1;
    /// Tuples kept per ordered pair; 0 keeps all.
    std::size_t top_k = 0;
    bool ascending = false;
};

/// Review order: distinct_b (descending unless `ascending`), then support_a
/// descending, then canonical value_a, attr_a, attr_b.
bool ranks_before(const PairCount& x, const PairCount& y, bool ascending = false);

/// Digest over the sorted record ids of the rows passing the filter.
std::string dataset_digest(const std::vector<FingerprintRecord>& records, const RowFilter& filter);

/// One report per category over every ordered attribute pair inside it.
std::vector<CandidateReport> discover(const std::vector<FingerprintRecord>& records,
                                      const AttributeCategorySet& categories, const DiscoverOptions& options = {},
                                      const AttributeRegistry& registry = AttributeRegistry::builtin());

nlohmann::ordered_json report_to_json(const CandidateReport& report);
CandidateReport report_from_json(const nlohmann::json& j);
nlohmann::ordered_json reports_to_json(const std::vector<CandidateReport>& reports);
std::vector<CandidateReport> reports_from_json(const nlohmann::json& j);

}  // namespace fpscan
