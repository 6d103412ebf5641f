#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fpscan/categories.hpp"
#include "fpscan/discovery.hpp"
#include "fpscan/engine.hpp"
#include "fpscan/kb.hpp"
#include "fpscan/record.hpp"

namespace fpscan {

/// Which rule flags count on top of the baseline verdict. Spatial includes
/// geo rules; Combined is any flag.
enum class EvalMode { None, Spatial, Temporal, Combined };
inline constexpr std::array<EvalMode, 4> kEvalModes = {EvalMode::None, EvalMode::Spatial, EvalMode::Temporal,
                                                       EvalMode::Combined};
std::string_view to_string(EvalMode mode);

bool mode_flags(const DetectionDecision& d, EvalMode mode);

/// The parts of a record evaluation needs.
struct EvalRow {
    std::string record_id;
    SourceLabel label;
    VerdictMap verdicts;
};
EvalRow eval_row(const FingerprintRecord& record);
/// Reads label and verdicts from records JSONL without building attribute maps.
std::vector<EvalRow> read_eval_rows(std::istream& in, const std::string& source = "records");

struct RateCounts {
    std::uint64_t total = 0;
    std::array<std::uint64_t, 4> detected{};  // indexed like kEvalModes

    double rate(EvalMode m) const;
    void merge(const RateCounts& other);
};

struct ServiceRates {
    std::string service;
    RateCounts bots;
    std::uint64_t missing_baseline = 0;  // bot and human rows without this service's verdict
    /// Humans judged human by baseline OR rules under Combined.
    std::uint64_t humans = 0;
    std::uint64_t humans_passed = 0;
    std::map<std::string, RateCounts> by_tag;

    double tnr_combined() const { return humans ? double(humans_passed) / double(humans) : 1.0; }
};

struct SplitServiceRates {
    std::string service;
    RateCounts train;      // train rules on the train side
    RateCounts test;       // train rules on the test side
    RateCounts reference;  // rules built from every record, on the test side
    /// reference Combined rate minus test Combined rate.
    double drop() const { return reference.rate(EvalMode::Combined) - test.rate(EvalMode::Combined); }
};

struct SplitReport {
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    std::uint64_t train_records = 0;
    std::uint64_t test_records = 0;
    std::size_t train_rules = 0;
    std::size_t reference_rules = 0;
    std::vector<SplitServiceRates> services;
};

struct EvalReport {
    std::vector<ServiceRates> services;
    /// Human rows that no rule flagged, over all human rows.
    std::uint64_t humans = 0;
    std::uint64_t humans_unflagged = 0;
    std::optional<SplitReport> split;

    double tnr_on_humans() const { return humans ? double(humans_unflagged) / double(humans) : 1.0; }
    const ServiceRates* service(std::string_view name) const;
};

/// Joins rows to decisions by record_id. Every row needs a decision
/// (DataError otherwise). With an empty `services` list every service seen
/// in a verdict is reported.
EvalReport compute_rates(const std::vector<EvalRow>& rows, const std::vector<DetectionDecision>& decisions,
                         std::vector<std::string> services = {});

struct SplitOptions {
    double fraction = 0.8;
    std::uint64_t seed = 0;
    /// Rows used for discovery on each side; the baseline service decides
    /// EvadedOnly.
    FilterMode filter = FilterMode::EvadedOnly;
    std::string baseline_service;
    std::uint64_t min_support = 1;
};

/// Ruleset from automatic KB adjudication of discovered candidates, plus the
/// KB geo rules and default temporal watches.
RuleSet auto_rules(const std::vector<FingerprintRecord>& records, const AttributeCategorySet& categories,
                   const KnowledgeBase& kb, const RowFilter& filter, std::uint64_t min_support = 1,
                   const AttributeRegistry& registry = AttributeRegistry::builtin());

/// Splits records by a seeded hash of record_id, derives rules from the
/// train side and the whole corpus, and evaluates both on the test side.
/// Throws DataError when either side is empty.
SplitReport split_eval(const std::vector<FingerprintRecord>& records, const SplitOptions& options,
                       const AttributeCategorySet& categories, const KnowledgeBase& kb,
                       std::vector<std::string> services = {},
                       const AttributeRegistry& registry = AttributeRegistry::builtin());

/// True when the seeded hash puts `record_id` on the train side.
bool in_train_split(std::string_view record_id, double fraction, std::uint64_t seed);

enum class ReportFormat { Json, Csv, Text };
std::optional<ReportFormat> parse_report_format(std::string_view text);

nlohmann::ordered_json report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);
/// json: lossless; csv: header plus one row per (service, mode); text: a
/// table with one row per mode and one column per service.
std::string emit_report(const EvalReport& report, ReportFormat format);

}  // namespace fpscan
