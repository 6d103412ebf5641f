#pragma once

// Record builders and random generators shared by the unit and acceptance
// tests. Generators draw from fpscan::Rng so failures reproduce from a seed.

#include <string>
#include <utility>
#include <vector>

#include <map>

#include "fpscan/discovery.hpp"
#include "fpscan/geo.hpp"
#include "fpscan/kb.hpp"
#include "fpscan/record.hpp"
#include "fpscan/registry.hpp"
#include "fpscan/rules.hpp"
#include "fpscan/synth.hpp"

namespace testkit {

using fpscan::AttributeValue;
using fpscan::FingerprintRecord;
using fpscan::Rng;

inline std::string data_path(const std::string& name) { return std::string(FPSCAN_TEST_DATA) + "/" + name; }

/// Value typed by the registry kind of `attr`, from its canonical text.
AttributeValue typed(const std::string& attr, const std::string& text);

/// Record with the given attributes (canonical text forms), typed by the
/// registry. Location attributes also get their offset sets.
FingerprintRecord make_record(const std::string& id, std::vector<std::pair<std::string, std::string>> attrs,
                              std::int64_t ts = 0);

/// Adds ip.location.offsets / timezone.offsets for whichever of ip.location
/// and timezone the record carries.
void add_offsets(FingerprintRecord& r, const fpscan::GeoTable& geo = fpscan::GeoTable::builtin());

AttributeValue random_value(Rng& rng);
std::string random_text(Rng& rng, std::size_t max_len = 12);
fpscan::RuleSet random_ruleset(Rng& rng);
/// Small-alphabet records for group-by oracles.
std::vector<FingerprintRecord> random_corpus(Rng& rng, std::size_t n, const std::vector<std::string>& attrs);

/// Group-by over canonical strings, written without the discovery code:
/// canonical value_a -> canonical value_b -> rows.
using PairTable = std::map<std::string, std::map<std::string, std::uint64_t>>;
PairTable brute_force_pairs(const std::vector<FingerprintRecord>& rows, const std::string& attr_a,
                            const std::string& attr_b, const fpscan::RowFilter& filter, bool include_absent_a);
/// Empty when `counts` matches the table; otherwise a description of the
/// first difference.
std::string compare_pairs(const std::vector<fpscan::PairCount>& counts, const PairTable& table);

struct MalformedCase {
    std::string text;
    std::size_t line = 0;
    std::size_t column = 0;
};
/// tests/data/malformed_rules.txt
std::vector<MalformedCase> malformed_rule_cases();

/// Normalized synthetic records (derived attributes filled in).
std::vector<FingerprintRecord> normalized(std::vector<FingerprintRecord> raw);

}  // namespace testkit
