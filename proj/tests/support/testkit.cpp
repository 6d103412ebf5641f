#include "testkit.hpp"

#include <algorithm>
#include <cmath>

#include <sstream>

#include "fpscan/io.hpp"
#include "fpscan/normalize.hpp"

namespace testkit {

using namespace fpscan;

AttributeValue typed(const std::string& attr, const std::string& text) {
    const auto kind = AttributeRegistry::builtin().kind(attr);
    AttributeValue v = parse_canonical(text);
    if (!kind) return v;
    switch (*kind) {
        case ValueKind::Text: return AttributeValue::text(text);
        case ValueKind::Real:
            if (auto n = v.as_number()) return AttributeValue::real(*n);
            break;
        default: break;
    }
    return v;
}

void add_offsets(FingerprintRecord& r, const GeoTable& geo) {
    if (const auto* region = r.get("ip.location").as_text()) {
        for (const auto& row : geo.rows())
            if (row.region == *region) {
                r.set("ip.location.offsets", row.offsets.to_value());
                break;
            }
    }
    if (const auto* zone = r.get("timezone").as_text()) r.set("timezone.offsets", timezone_to_offsets(*zone).to_value());
}

FingerprintRecord make_record(const std::string& id, std::vector<std::pair<std::string, std::string>> attrs,
                              std::int64_t ts) {
    FingerprintRecord r;
    r.record_id = id;
    r.timestamp_ms = ts;
    for (auto& [name, text] : attrs) r.set(name, typed(name, text));
    add_offsets(r);
    return r;
}

std::string random_text(Rng& rng, std::size_t max_len) {
    static const std::vector<std::string> alphabet = {"a", "b", "c", "X", "Y", "Z", "0", "1", "9", " ", ",", "[", "]",
                                                      "\\", "\"", "x", ".", "-", "_", "/", "@", "#", ":",
                                                      "\xE2\x8A\xA5", "\xC3\xA9"};
    const auto len = rng.below(max_len + 1);
    std::string s;
    for (std::size_t i = 0; i < len; ++i) s += rng.pick(alphabet);
    return s;
}

AttributeValue random_value(Rng& rng) {
    switch (rng.below(7)) {
        case 0: return AttributeValue::absent();
        case 1: return AttributeValue::text(random_text(rng));
        case 2: return AttributeValue::integer(static_cast<std::int64_t>(rng.next()) >> rng.below(64));
        case 3: {
            static const double specials[] = {0.0, -0.0, 0.5, 1.0, 8.0, -3.25, 1e20, 1e-7, 123456.789};
            if (rng.chance(0.5)) return AttributeValue::real(specials[rng.below(9)]);
            return AttributeValue::real((rng.unit() - 0.5) * std::pow(10.0, double(rng.between(-8, 12))));
        }
        case 4: return AttributeValue::flag(rng.chance(0.5));
        case 5: {
            AttributeValue::TextList l;
            const auto n = rng.below(4);
            for (std::size_t i = 0; i < n; ++i) l.push_back(random_text(rng, 6));
            return AttributeValue::text_list(std::move(l));
        }
        default:
            return AttributeValue::resolution(static_cast<std::uint32_t>(rng.between(1, 5000)),
                                              static_cast<std::uint32_t>(rng.between(1, 5000)));
    }
}

namespace {

const std::vector<std::string>& rule_attrs() {
    static const std::vector<std::string> attrs = {"ua.device", "ua.browser", "ua.os", "platform", "vendor",
                                                   "screen.resolution", "max_touch_points", "hardware.concurrency",
                                                   "device.memory", "touch_support", "color_depth", "plugins"};
    return attrs;
}

AttributeValue rule_literal(Rng& rng) {
    switch (rng.below(6)) {
        case 0: return AttributeValue::text(random_text(rng, 10));
        case 1: return AttributeValue::integer(rng.between(-100000, 100000));
        case 2: return AttributeValue::real(double(rng.between(-4000, 4000)) / 8.0);
        case 3: return AttributeValue::flag(rng.chance(0.5));
        default:
            return AttributeValue::resolution(static_cast<std::uint32_t>(rng.between(1, 4000)),
                                              static_cast<std::uint32_t>(rng.between(1, 4000)));
    }
}

AttributeValue number(Rng& rng) {
    if (rng.chance(0.5)) return AttributeValue::integer(rng.between(-1000, 1000));
    return AttributeValue::real(double(rng.between(-8000, 8000)) / 4.0);
}

std::string ident(Rng& rng) {
    static const std::string first = "abcdefghijklmnopqrstuvwxyz_";
    static const std::string rest = "abcdefghijklmnopqrstuvwxyz0123456789_-";
    std::string s(1, first[rng.below(first.size())]);
    const auto n = rng.below(8);
    for (std::size_t i = 0; i < n; ++i) s += rest[rng.below(rest.size())];
    return s;
}

}  // namespace

RuleSet random_ruleset(Rng& rng) {
    RuleSet rs;
    const auto nsets = rng.below(4);
    std::vector<std::string> set_names;
    for (std::size_t i = 0; i < nsets; ++i) {
        std::string name = "s" + std::to_string(i) + "_" + ident(rng);
        std::vector<AttributeValue> values;
        const auto n = rng.between(1, 5);
        for (std::int64_t k = 0; k < n; ++k) values.push_back(rule_literal(rng));
        rs.sets.emplace(name, std::move(values));
        set_names.push_back(name);
    }
    const auto nrules = rng.below(8);
    const auto& attrs = rule_attrs();
    for (std::size_t i = 0; i < nrules; ++i) {
        FilterRule rule;
        rule.id = "r" + std::to_string(i) + ident(rng);
        if (rng.chance(0.3)) rule.provenance = rng.chance(0.5) ? "adjudicated/Screen" : "KB/" + ident(rng);
        const auto kind = rng.below(6);
        if (kind == 0) {
            rule.kind = RuleKind::Temporal;
            rule.directive = TemporalDirective{rng.chance(0.5) ? KeyKind::Cookie : KeyKind::Ip, rng.pick(attrs)};
        } else {
            rule.kind = kind == 1 ? RuleKind::Geo : RuleKind::Spatial;
            if (rule.kind == RuleKind::Geo) rule.atoms.push_back(OffsetsDisjoint{"ip.location", "timezone"});
            const auto natoms = rng.between(rule.kind == RuleKind::Geo ? 0 : 1, 4);
            for (std::int64_t k = 0; k < natoms; ++k) {
                const std::string& attr = rng.pick(attrs);
                switch (rng.below(5)) {
                    case 0: {
                        static const CompareOp ops[] = {CompareOp::Eq, CompareOp::Ne};
                        rule.atoms.push_back(Compare{attr, ops[rng.below(2)], rule_literal(rng)});
                        break;
                    }
                    case 1:
                        rule.atoms.push_back(Compare{attr, rng.chance(0.5) ? CompareOp::Lt : CompareOp::Gt, number(rng)});
                        break;
                    case 2: rule.atoms.push_back(Between{attr, number(rng), number(rng)}); break;
                    case 3:
                        if (!set_names.empty()) {
                            rule.atoms.push_back(Membership{attr, rng.chance(0.5), rng.pick(set_names)});
                            break;
                        }
                        [[fallthrough]];
                    default: rule.atoms.push_back(Presence{attr, rng.chance(0.5)}); break;
                }
            }
        }
        rs.rules.push_back(std::move(rule));
    }
    return rs;
}

std::vector<FingerprintRecord> random_corpus(Rng& rng, std::size_t n, const std::vector<std::string>& attrs) {
    static const char* labels[] = {"human", "bot", "unknown"};
    std::vector<FingerprintRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        FingerprintRecord r;
        r.record_id = "c" + std::to_string(i);
        r.timestamp_ms = rng.between(0, 1000000);
        for (const auto& a : attrs) {
            switch (rng.below(5)) {
                case 0: break;  // Absent
                case 1: r.set(a, AttributeValue::integer(rng.between(0, 3))); break;
                case 2: r.set(a, AttributeValue::text(std::string(1, char('p' + rng.below(4))))); break;
                case 3: r.set(a, AttributeValue::real(double(rng.below(3)))); break;
                default: r.set(a, AttributeValue::resolution(1 + std::uint32_t(rng.below(2)), 7)); break;
            }
        }
        const std::string label = labels[rng.below(3)];
        r.label = label == "bot" ? SourceLabel::bot("S" + std::to_string(rng.below(3))) : label == "human" ? SourceLabel::human() : SourceLabel::unknown();
        for (const char* service : {"datadome", "botd"})
            if (!rng.chance(0.1)) r.verdicts[service] = {rng.chance(0.5) ? Decision::Bot : Decision::Human, service};
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<FingerprintRecord> normalized(std::vector<FingerprintRecord> raw) {
    Normalizer n(AttributeRegistry::builtin(), GeoTable::builtin());
    for (auto& r : raw) n.derive(r);
    return raw;
}

PairTable brute_force_pairs(const std::vector<FingerprintRecord>& rows, const std::string& attr_a,
                            const std::string& attr_b, const RowFilter& filter, bool include_absent_a) {
    PairTable out;
    for (const auto& r : rows) {
        bool keep = false;
        switch (filter.mode) {
            case FilterMode::All: keep = true; break;
            case FilterMode::AllBots: keep = r.label.is_bot(); break;
            case FilterMode::EvadedOnly:
                if (!r.label.is_bot()) break;
                for (const auto& [service, v] : r.verdicts)
                    if ((filter.baseline_service.empty() || service == filter.baseline_service) &&
                        v.decision == Decision::Human)
                        keep = true;
                break;
        }
        if (!keep) continue;
        if (r.get(attr_a).is_absent() && !include_absent_a) continue;
        ++out[canonical_serialize(r.get(attr_a))][canonical_serialize(r.get(attr_b))];
    }
    return out;
}

std::string compare_pairs(const std::vector<PairCount>& counts, const PairTable& table) {
    if (counts.size() != table.size())
        return std::to_string(counts.size()) + " groups, oracle has " + std::to_string(table.size());
    for (const auto& pc : counts) {
        auto key = canonical_serialize(pc.value_a);
        auto it = table.find(key);
        if (it == table.end()) return "unexpected group " + key;
        if (pc.distinct_b != it->second.size() || pc.values_b.size() != it->second.size())
            return "distinct_b differs for " + key;
        std::uint64_t support = 0;
        auto expected = it->second.begin();
        for (const auto& vs : pc.values_b) {
            if (canonical_serialize(vs.value) != expected->first || vs.support != expected->second)
                return "value support differs for " + key;
            support += vs.support;
            ++expected;
        }
        if (support != pc.support_a) return "support_a differs for " + key;
    }
    return {};
}

std::vector<MalformedCase> malformed_rule_cases() {
    std::istringstream in(read_file(data_path("malformed_rules.txt")));
    std::vector<MalformedCase> out;
    std::string line;
    bool in_case = false;
    while (std::getline(in, line)) {
        if (line == "%%") {
            out.emplace_back();
            in_case = true;
        } else if (in_case && line.rfind("@ ", 0) == 0 && out.back().line == 0) {
            std::istringstream h(line.substr(2));
            h >> out.back().line >> out.back().column;
        } else if (in_case) {
            out.back().text += line + "\n";
        }
    }
    return out;
}

}  // namespace testkit
