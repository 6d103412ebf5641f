#include "fpscan/discovery.hpp"

#include <algorithm>
#include <map>

#include "fpscan/error.hpp"
#include "fpscan/io.hpp"

namespace fpscan {

namespace {

using ojson = nlohmann::ordered_json;

struct Interned {
    std::vector<AttributeValue> values;
    std::vector<std::string> keys;
    std::unordered_map<std::string, std::uint32_t> ids;

    std::uint32_t intern(std::string key, const AttributeValue& v) {
        auto [it, inserted] = ids.emplace(std::move(key), static_cast<std::uint32_t>(values.size()));
        if (inserted) {
            values.push_back(v);
            keys.push_back(it->first);
        }
        return it->second;
    }
};

std::vector<PairCount> build_counts(const std::string& attr_a, const std::string& attr_b, const Interned& col_a,
                                    const Interned& col_b,
                                    const std::unordered_map<std::uint64_t, std::uint64_t>& pairs) {
    std::map<std::uint32_t, std::vector<std::pair<std::uint32_t, std::uint64_t>>> groups;
    for (const auto& [key, n] : pairs) groups[static_cast<std::uint32_t>(key >> 32)].emplace_back(
        static_cast<std::uint32_t>(key & 0xffffffffu), n);
    std::vector<PairCount> out;
    out.reserve(groups.size());
    for (auto& [id_a, members] : groups) {
        std::sort(members.begin(), members.end(), [&](const auto& x, const auto& y) {
            return col_b.keys[x.first] < col_b.keys[y.first];
        });
        PairCount pc;
        pc.attr_a = attr_a;
        pc.attr_b = attr_b;
        pc.value_a = col_a.values[id_a];
        for (const auto& [id_b, n] : members) {
            pc.values_b.push_back({col_b.values[id_b], n});
            pc.support_a += n;
        }
        pc.distinct_b = pc.values_b.size();
        out.push_back(std::move(pc));
    }
    return out;
}

void require_registered(const AttributeRegistry& registry, const std::string& a, const std::string& b) {
    std::vector<std::string> missing;
    if (!registry.contains(a)) missing.push_back(a);
    if (!registry.contains(b) && b != a) missing.push_back(b);
    if (!missing.empty()) throw UnknownAttributeError(std::move(missing));
}

ojson pair_to_json(const PairCount& pc) {
    ojson values = ojson::array();
    for (const auto& vs : pc.values_b)
        values.push_back(ojson{{"value", canonical_serialize(vs.value)}, {"support", vs.support}});
    return ojson{{"attr_a", pc.attr_a},         {"value_a", canonical_serialize(pc.value_a)},
                 {"attr_b", pc.attr_b},         {"distinct_b", pc.distinct_b},
                 {"support_a", pc.support_a},   {"values_b", std::move(values)}};
}

PairCount pair_from_json(const nlohmann::json& j) {
    PairCount pc;
    pc.attr_a = j.at("attr_a").get<std::string>();
    pc.value_a = parse_canonical(j.at("value_a").get<std::string>());
    pc.attr_b = j.at("attr_b").get<std::string>();
    pc.distinct_b = j.at("distinct_b").get<std::uint64_t>();
    pc.support_a = j.at("support_a").get<std::uint64_t>();
    for (const auto& v : j.at("values_b"))
        pc.values_b.push_back({parse_canonical(v.at("value").get<std::string>()), v.at("support").get<std::uint64_t>()});
    if (pc.values_b.size() != pc.distinct_b) throw DataError("candidate pair: distinct_b does not match values_b");
    return pc;
}

}  // namespace

std::string_view to_string(FilterMode mode) {
    switch (mode) {
        case FilterMode::EvadedOnly: return "evaded";
        case FilterMode::AllBots: return "bots";
        case FilterMode::All: return "all";
    }
    return "evaded";
}

std::optional<FilterMode> parse_filter_mode(std::string_view text) {
    if (text == "evaded") return FilterMode::EvadedOnly;
    if (text == "bots") return FilterMode::AllBots;
    if (text == "all") return FilterMode::All;
    return std::nullopt;
}

bool RowFilter::accepts(const FingerprintRecord& record) const {
    switch (mode) {
        case FilterMode::All: return true;
        case FilterMode::AllBots: return record.label.is_bot();
        case FilterMode::EvadedOnly:
            if (!record.label.is_bot()) return false;
            if (!baseline_service.empty()) return record.verdict(baseline_service) == Decision::Human;
            return std::any_of(record.verdicts.begin(), record.verdicts.end(),
                               [](const auto& kv) { return kv.second.decision == Decision::Human; });
    }
    return false;
}

std::uint32_t PairAccumulator::Column::intern_key(const std::string& key, const AttributeValue& v) {
    auto [it, inserted] = ids.emplace(key, static_cast<std::uint32_t>(values.size()));
    if (inserted) {
        values.push_back(v);
        keys.push_back(key);
    }
    return it->second;
}

std::uint32_t PairAccumulator::Column::intern(const AttributeValue& v) { return intern_key(canonical_serialize(v), v); }

PairAccumulator::PairAccumulator(std::string attr_a, std::string attr_b, bool include_absent_a)
    : attr_a_(std::move(attr_a)), attr_b_(std::move(attr_b)), include_absent_a_(include_absent_a) {}

void PairAccumulator::add(const FingerprintRecord& record) {
    const auto& a = record.get(attr_a_);
    if (a.is_absent() && !include_absent_a_) return;
    std::uint64_t key = (static_cast<std::uint64_t>(col_a_.intern(a)) << 32) | col_b_.intern(record.get(attr_b_));
    ++pairs_[key];
}

void PairAccumulator::merge(const PairAccumulator& other) {
    if (other.attr_a_ != attr_a_ || other.attr_b_ != attr_b_)
        throw Error("cannot merge accumulators of different attribute pairs");
    for (const auto& [key, n] : other.pairs_) {
        auto ia = static_cast<std::uint32_t>(key >> 32);
        auto ib = static_cast<std::uint32_t>(key & 0xffffffffu);
        std::uint64_t k = (static_cast<std::uint64_t>(col_a_.intern_key(other.col_a_.keys[ia], other.col_a_.values[ia]))
                           << 32) |
                          col_b_.intern_key(other.col_b_.keys[ib], other.col_b_.values[ib]);
        pairs_[k] += n;
    }
}

std::vector<PairCount> PairAccumulator::result() const {
    Interned a{col_a_.values, col_a_.keys, {}};
    Interned b{col_b_.values, col_b_.keys, {}};
    return build_counts(attr_a_, attr_b_, a, b, pairs_);
}

std::vector<PairCount> count_pairs(const std::vector<FingerprintRecord>& records, const std::string& attr_a,
                                   const std::string& attr_b, const CountOptions& options,
                                   const AttributeRegistry& registry) {
    require_registered(registry, attr_a, attr_b);
    PairAccumulator acc(attr_a, attr_b, options.include_absent_a);
    for (const auto& r : records)
        if (options.filter.accepts(r)) acc.add(r);
    return acc.result();
}

bool ranks_before(const PairCount& x, const PairCount& y, bool ascending) {
    if (x.distinct_b != y.distinct_b) return ascending ? x.distinct_b < y.distinct_b : x.distinct_b > y.distinct_b;
    if (x.support_a != y.support_a) return x.support_a > y.support_a;
    auto vx = canonical_serialize(x.value_a);
    auto vy = canonical_serialize(y.value_a);
    if (vx != vy) return vx < vy;
    if (x.attr_a != y.attr_a) return x.attr_a < y.attr_a;
    return x.attr_b < y.attr_b;
}

std::string dataset_digest(const std::vector<FingerprintRecord>& records, const RowFilter& filter) {
    std::vector<std::string_view> ids;
    for (const auto& r : records)
        if (filter.accepts(r)) ids.push_back(r.record_id);
    std::sort(ids.begin(), ids.end());
    std::uint64_t h = fnv1a64({});
    for (auto id : ids) {
        h = fnv1a64(id, h);
        h = fnv1a64("\n", h);
    }
    return hex64(h);
}

std::vector<CandidateReport> discover(const std::vector<FingerprintRecord>& records,
                                      const AttributeCategorySet& categories, const DiscoverOptions& options,
                                      const AttributeRegistry& registry) {
    if (categories.empty()) throw DataError("discover needs at least one attribute category");
    std::vector<const FingerprintRecord*> rows;
    for (const auto& r : records)
        if (options.count.filter.accepts(r)) rows.push_back(&r);
    std::string digest = dataset_digest(records, options.count.filter);

    // Each attribute is interned once and shared by every pair using it.
    std::map<std::string, std::pair<Interned, std::vector<std::uint32_t>>, std::less<>> columns;
    auto column = [&](const std::string& name) -> const std::pair<Interned, std::vector<std::uint32_t>>& {
        auto it = columns.find(name);
        if (it != columns.end()) return it->second;
        auto& col = columns[name];
        col.second.reserve(rows.size());
        for (const auto* r : rows) {
            const auto& v = r->get(name);
            col.second.push_back(col.first.intern(canonical_serialize(v), v));
        }
        return col;
    };

    std::vector<CandidateReport> reports;
    for (const auto& category : categories.categories) {
        CandidateReport report;
        report.category = category.name;
        report.attributes = category.attributes;
        report.dataset_digest = digest;
        report.filter_mode = options.count.filter.mode;
        for (const auto& a : category.attributes) {
            for (const auto& b : category.attributes) {
                if (a == b) continue;
                require_registered(registry, a, b);
                const auto& [ca, ids_a] = column(a);
                const auto& [cb, ids_b] = column(b);
                auto absent_a = ca.ids.find(std::string(kAbsentSentinel));
                std::unordered_map<std::uint64_t, std::uint64_t> pairs;
                for (std::size_t i = 0; i < rows.size(); ++i) {
                    if (!options.count.include_absent_a && absent_a != ca.ids.end() && ids_a[i] == absent_a->second)
                        continue;
                    ++pairs[(static_cast<std::uint64_t>(ids_a[i]) << 32) | ids_b[i]];
                }
                auto counts = build_counts(a, b, ca, cb, pairs);
                std::erase_if(counts, [&](const PairCount& pc) { return pc.support_a < options.min_support; });
                std::sort(counts.begin(), counts.end(),
                          [](const PairCount& x, const PairCount& y) { return ranks_before(x, y, false); });
                if (options.top_k > 0 && counts.size() > options.top_k) counts.resize(options.top_k);
                for (auto& pc : counts) report.pairs.push_back(std::move(pc));
            }
        }
        std::sort(report.pairs.begin(), report.pairs.end(),
                  [&](const PairCount& x, const PairCount& y) { return ranks_before(x, y, options.ascending); });
        reports.push_back(std::move(report));
    }
    return reports;
}

ojson report_to_json(const CandidateReport& report) {
    ojson pairs = ojson::array();
    for (const auto& pc : report.pairs) pairs.push_back(pair_to_json(pc));
    return ojson{{"category", report.category},
                 {"attributes", report.attributes},
                 {"filter_mode", to_string(report.filter_mode)},
                 {"dataset_digest", report.dataset_digest},
                 {"pairs", std::move(pairs)}};
}

CandidateReport report_from_json(const nlohmann::json& j) {
    CandidateReport r;
    try {
        r.category = j.at("category").get<std::string>();
        r.attributes = j.at("attributes").get<std::vector<std::string>>();
        auto mode = parse_filter_mode(j.at("filter_mode").get<std::string>());
        if (!mode) throw DataError("candidate report: unknown filter_mode");
        r.filter_mode = *mode;
        r.dataset_digest = j.at("dataset_digest").get<std::string>();
        for (const auto& p : j.at("pairs")) r.pairs.push_back(pair_from_json(p));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("candidate report: ") + e.what());
    }
    return r;
}

ojson reports_to_json(const std::vector<CandidateReport>& reports) {
    ojson out = ojson::array();
    for (const auto& r : reports) out.push_back(report_to_json(r));
    return ojson{{"reports", std::move(out)}};
}

std::vector<CandidateReport> reports_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("reports") || !j["reports"].is_array())
        throw DataError("candidate reports: expected {\"reports\": [...]}");
    std::vector<CandidateReport> out;
    for (const auto& r : j["reports"]) out.push_back(report_from_json(r));
    return out;
}

}  // namespace fpscan
