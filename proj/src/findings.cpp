#include "fpscan/findings.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <tuple>

#include "fpscan/error.hpp"

namespace fpscan {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

AttributeValue value_from_json(const json& j) {
    if (j.is_string()) return parse_canonical(j.get<std::string>());
    return kb_literal(j);
}

ojson number_json(const AttributeValue& v) {
    if (const auto* i = v.as_integer()) return *i;
    if (const auto* r = v.as_real()) return *r;
    return canonical_serialize(v);
}

std::string_view op_name(ValuePredicate::Op op) {
    switch (op) {
        case ValuePredicate::Op::Eq: return "eq";
        case ValuePredicate::Op::In: return "in";
        case ValuePredicate::Op::NotIn: return "not_in";
        case ValuePredicate::Op::Range: return "range";
        case ValuePredicate::Op::Lt: return "lt";
        case ValuePredicate::Op::Gt: return "gt";
        case ValuePredicate::Op::OffsetsDisjoint: return "offsets_disjoint";
    }
    return "eq";
}

std::string_view verdict_name(Verdict3 v) {
    switch (v) {
        case Verdict3::Inconsistent: return "inconsistent";
        case Verdict3::Consistent: return "consistent";
        case Verdict3::Unknown: return "unknown";
    }
    return "unknown";
}

Verdict3 parse_verdict(const std::string& s) {
    if (s == "inconsistent") return Verdict3::Inconsistent;
    if (s == "consistent") return Verdict3::Consistent;
    if (s == "unknown") return Verdict3::Unknown;
    throw DataError("unknown adjudication verdict '" + s + "' (expected inconsistent, consistent or unknown)");
}

void require_attrs(const AttributeRegistry& registry, std::initializer_list<const std::string*> names) {
    std::vector<std::string> missing;
    for (const auto* n : names)
        if (!registry.contains(*n)) missing.push_back(*n);
    if (!missing.empty()) throw UnknownAttributeError(std::move(missing));
}

std::string tuple_key(const std::string& a, const AttributeValue& v, const std::string& b) {
    return a + '\x1f' + canonical_serialize(v) + '\x1f' + b;
}

std::string finding_sort_key(const Finding& f) {
    return tuple_key(f.attr_a, f.value_a, f.attr_b) + '\x1f' + predicate_to_json(f.predicate).dump();
}

bool is_geo_pair(const KnowledgeBase& kb, const std::string& a, const std::string& b) {
    for (const auto& g : kb.geo_rules())
        if ((g.region_attr == a && g.zone_attr == b) || (g.region_attr == b && g.zone_attr == a)) return true;
    return false;
}

class SetTable {
public:
    explicit SetTable(RuleSet& rs) : rs_(rs) {}

    // Publishes `values` under `name`; a clash with different contents is a
    // KB inconsistency.
    const std::string& exact(const std::string& name, const std::vector<AttributeValue>& values) {
        auto [it, inserted] = rs_.sets.emplace(name, values);
        if (!inserted && it->second != values) throw DataError("set @" + name + " defined twice with different values");
        return it->first;
    }

    // Publishes under `base`, or base_2, base_3... when taken.
    std::string fresh(const std::string& base, const std::vector<AttributeValue>& values) {
        std::string name = base;
        for (int n = 2;; ++n) {
            auto it = rs_.sets.find(name);
            if (it == rs_.sets.end()) {
                rs_.sets.emplace(name, values);
                return name;
            }
            if (it->second == values) return name;
            name = base + "_" + std::to_string(n);
        }
    }

private:
    RuleSet& rs_;
};

}  // namespace

ojson predicate_to_json(const ValuePredicate& p) {
    ojson j{{"op", op_name(p.op)}};
    switch (p.op) {
        case ValuePredicate::Op::Eq: j["value"] = p.values.empty() ? "" : canonical_serialize(p.values.front()); break;
        case ValuePredicate::Op::In:
        case ValuePredicate::Op::NotIn:
            if (!p.set.empty()) j["set"] = p.set;
            else if (!p.catalog.empty()) j["catalog"] = p.catalog;
            else if (p.combo) j["combo"] = true;
            else {
                ojson values = ojson::array();
                for (const auto& v : p.values) values.push_back(canonical_serialize(v));
                j["values"] = values;
            }
            break;
        case ValuePredicate::Op::Range:
            j["min"] = number_json(p.low);
            j["max"] = number_json(p.high);
            break;
        case ValuePredicate::Op::Lt:
        case ValuePredicate::Op::Gt: j["value"] = number_json(p.low); break;
        case ValuePredicate::Op::OffsetsDisjoint: break;
    }
    return j;
}

ValuePredicate predicate_from_json(const json& j) {
    ValuePredicate p;
    try {
        auto op = j.at("op").get<std::string>();
        if (op == "eq") {
            p.op = ValuePredicate::Op::Eq;
            p.values.push_back(value_from_json(j.at("value")));
        } else if (op == "in" || op == "not_in") {
            p.op = op == "in" ? ValuePredicate::Op::In : ValuePredicate::Op::NotIn;
            int sources = 0;
            if (j.contains("values")) {
                ++sources;
                for (const auto& v : j["values"]) p.values.push_back(value_from_json(v));
                if (p.values.empty()) throw DataError("predicate: empty value list");
            }
            if (j.contains("set")) {
                ++sources;
                p.set = j["set"].get<std::string>();
                if (!p.set.empty() && p.set.front() == '@') p.set.erase(0, 1);
            }
            if (j.contains("catalog")) {
                ++sources;
                p.catalog = j["catalog"].get<std::string>();
                if (!catalog_field_by_name(p.catalog)) throw DataError("predicate: unknown catalog field '" + p.catalog + "'");
            }
            if (j.contains("combo")) {
                ++sources;
                p.combo = j["combo"].get<bool>();
            }
            if (sources != 1) throw DataError("predicate '" + op + "' needs exactly one of values, set, catalog, combo");
        } else if (op == "range") {
            p.op = ValuePredicate::Op::Range;
            p.low = value_from_json(j.at("min"));
            p.high = value_from_json(j.at("max"));
            if (!p.low.as_number() || !p.high.as_number()) throw DataError("predicate: range bounds must be numbers");
        } else if (op == "lt" || op == "gt") {
            p.op = op == "lt" ? ValuePredicate::Op::Lt : ValuePredicate::Op::Gt;
            p.low = value_from_json(j.at("value"));
            if (!p.low.as_number()) throw DataError("predicate: '" + op + "' needs a number");
        } else if (op == "offsets_disjoint") {
            p.op = ValuePredicate::Op::OffsetsDisjoint;
        } else {
            throw DataError("predicate: unknown op '" + op + "'");
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("predicate: ") + e.what());
    }
    return p;
}

std::vector<TemporalDirective> default_temporal_findings() {
    return {{KeyKind::Cookie, "hardware.concurrency"},
            {KeyKind::Cookie, "device.memory"},
            {KeyKind::Cookie, "platform"},
            {KeyKind::Ip, "timezone"},
            {KeyKind::Ip, "geolocation.region"}};
}

ojson findings_to_json(const FindingsFile& f) {
    ojson spatial = ojson::array();
    for (const auto& x : f.spatial) {
        ojson e{{"attr_a", x.attr_a},
                {"value_a", canonical_serialize(x.value_a)},
                {"attr_b", x.attr_b},
                {"predicate", predicate_to_json(x.predicate)}};
        if (!x.provenance.empty()) e["provenance"] = x.provenance;
        spatial.push_back(std::move(e));
    }
    ojson temporal = ojson::array();
    for (const auto& t : f.temporal) temporal.push_back({{"key", to_string(t.key)}, {"watch", t.watch}});
    return {{"spatial", spatial}, {"temporal", temporal}};
}

FindingsFile findings_from_json(const json& j, const AttributeRegistry& registry) {
    FindingsFile f;
    if (!j.is_object()) throw DataError("findings: expected a JSON object");
    try {
        for (const auto& e : j.value("spatial", json::array())) {
            Finding x;
            x.attr_a = e.at("attr_a").get<std::string>();
            x.value_a = value_from_json(e.at("value_a"));
            x.attr_b = e.at("attr_b").get<std::string>();
            x.predicate = predicate_from_json(e.at("predicate"));
            x.provenance = e.value("provenance", "");
            require_attrs(registry, {&x.attr_a, &x.attr_b});
            f.spatial.push_back(std::move(x));
        }
        for (const auto& e : j.value("temporal", json::array())) {
            TemporalDirective t;
            auto key = e.at("key").get<std::string>();
            if (key != "cookie" && key != "ip") throw DataError("findings: temporal key must be cookie or ip");
            t.key = key == "cookie" ? KeyKind::Cookie : KeyKind::Ip;
            t.watch = e.at("watch").get<std::string>();
            require_attrs(registry, {&t.watch});
            f.temporal.push_back(std::move(t));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("findings: ") + e.what());
    }
    return f;
}

std::vector<Adjudication> adjudications_from_json(const json& j, const AttributeRegistry& registry) {
    std::vector<Adjudication> out;
    auto one = [&](const json& a) {
        Adjudication adj;
        adj.category = a.at("category").get<std::string>();
        for (const auto& e : a.at("entries")) {
            AdjudicationEntry x;
            x.attr_a = e.at("attr_a").get<std::string>();
            x.value_a = value_from_json(e.at("value_a"));
            x.attr_b = e.at("attr_b").get<std::string>();
            x.predicate = predicate_from_json(e.at("predicate"));
            x.verdict = parse_verdict(e.at("verdict").get<std::string>());
            x.note = e.value("note", "");
            require_attrs(registry, {&x.attr_a, &x.attr_b});
            adj.entries.push_back(std::move(x));
        }
        out.push_back(std::move(adj));
    };
    try {
        if (j.is_object() && j.contains("adjudications")) {
            for (const auto& a : j["adjudications"]) one(a);
        } else if (j.is_object() && j.contains("entries")) {
            one(j);
        } else {
            throw DataError("adjudication: expected {\"adjudications\": [...]} or {\"category\", \"entries\"}");
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("adjudication: ") + e.what());
    }
    return out;
}

ojson adjudications_to_json(const std::vector<Adjudication>& all) {
    ojson list = ojson::array();
    for (const auto& a : all) {
        ojson entries = ojson::array();
        for (const auto& e : a.entries) {
            ojson x{{"attr_a", e.attr_a},
                    {"value_a", canonical_serialize(e.value_a)},
                    {"attr_b", e.attr_b},
                    {"predicate", predicate_to_json(e.predicate)},
                    {"verdict", verdict_name(e.verdict)}};
            if (!e.note.empty()) x["note"] = e.note;
            entries.push_back(std::move(x));
        }
        list.push_back({{"category", a.category}, {"entries", entries}});
    }
    return {{"adjudications", list}};
}

AdjudicationResult apply_adjudication(const CandidateReport& report, const Adjudication& adjudication) {
    if (report.category != adjudication.category)
        throw DataError("adjudication for category '" + adjudication.category + "' applied to report '" +
                        report.category + "'");
    auto in_category = [&](const std::string& attr) {
        return std::find(report.attributes.begin(), report.attributes.end(), attr) != report.attributes.end();
    };
    std::set<std::string> tuples;
    for (const auto& pc : report.pairs) tuples.insert(tuple_key(pc.attr_a, pc.value_a, pc.attr_b));

    AdjudicationResult result;
    for (const auto& e : adjudication.entries) {
        for (const auto* attr : {&e.attr_a, &e.attr_b})
            if (!in_category(*attr))
                throw DataError("dangling reference: attribute '" + *attr + "' is not in category '" +
                                report.category + "'");
        if (!tuples.count(tuple_key(e.attr_a, e.value_a, e.attr_b))) {
            ++result.unmatched;
            continue;
        }
        if (e.verdict == Verdict3::Inconsistent)
            result.findings.push_back({e.attr_a, e.value_a, e.attr_b, e.predicate, "adjudicated/" + report.category});
        else if (e.verdict == Verdict3::Unknown)
            result.pending.push_back(e);
    }
    return result;
}

std::vector<Finding> adjudication_findings(const Adjudication& adjudication) {
    std::vector<Finding> out;
    for (const auto& e : adjudication.entries)
        if (e.verdict == Verdict3::Inconsistent)
            out.push_back({e.attr_a, e.value_a, e.attr_b, e.predicate, "adjudicated/" + adjudication.category});
    return out;
}

std::vector<Finding> kb_adjudicate(const CandidateReport& report, const KnowledgeBase& kb) {
    std::vector<Finding> out;
    for (const auto& pc : report.pairs) {
        const auto* value_a = pc.value_a.as_text();
        if (!value_a || is_geo_pair(kb, pc.attr_a, pc.attr_b)) continue;
        auto violates = [&](const ValidValues& valid) {
            return std::any_of(pc.values_b.begin(), pc.values_b.end(), [&](const ValueSupport& vs) {
                return !vs.value.is_absent() && !valid.contains(vs.value);
            });
        };
        if (pc.attr_a == "ua.device") {
            const auto* entry = kb.device(*value_a);
            const auto* field = catalog_field_for_attribute(pc.attr_b);
            if (entry && field) {
                auto it = entry->find(pc.attr_b);
                if (it != entry->end() && violates(it->second)) {
                    ValuePredicate p;
                    p.op = ValuePredicate::Op::NotIn;
                    p.catalog = std::string(field->field);
                    out.push_back({pc.attr_a, pc.value_a, pc.attr_b, p, "KB/device-catalog"});
                }
            }
        }
        if (const auto* valid = kb.combo(pc.attr_a, *value_a, pc.attr_b); valid && violates(*valid)) {
            ValuePredicate p;
            p.op = ValuePredicate::Op::NotIn;
            p.combo = true;
            out.push_back({pc.attr_a, pc.value_a, pc.attr_b, p, "KB/combos"});
        }
    }
    return out;
}

RuleSet compile(const FindingsFile& findings, const KnowledgeBase& kb, const AttributeRegistry& registry) {
    RuleSet rs;
    SetTable sets(rs);

    std::vector<Finding> spatial = findings.spatial;
    for (const auto& f : spatial) require_attrs(registry, {&f.attr_a, &f.attr_b});
    std::sort(spatial.begin(), spatial.end(), [](const Finding& x, const Finding& y) {
        auto kx = finding_sort_key(x), ky = finding_sort_key(y);
        return kx != ky ? kx < ky : x.provenance < y.provenance;
    });
    spatial.erase(std::unique(spatial.begin(), spatial.end(),
                              [](const Finding& x, const Finding& y) { return finding_sort_key(x) == finding_sort_key(y); }),
                  spatial.end());

    std::vector<GeoRuleSpec> geo = kb.geo_rules();
    auto geo_covered = [&](const std::string& a, const std::string& b) {
        return std::any_of(geo.begin(), geo.end(), [&](const GeoRuleSpec& g) {
            return (g.region_attr == a && g.zone_attr == b) || (g.region_attr == b && g.zone_attr == a);
        });
    };

    int spatial_n = 0;
    for (const auto& f : spatial) {
        const auto& p = f.predicate;
        if (p.op == ValuePredicate::Op::OffsetsDisjoint) {
            for (const auto* attr : {&f.attr_a, &f.attr_b})
                if (!registry.contains(*attr + ".offsets"))
                    throw DataError("offsets_disjoint finding on '" + *attr + "', which has no derived offsets");
            if (!geo_covered(f.attr_a, f.attr_b))
                geo.push_back({f.attr_a, f.attr_b, f.provenance.empty() ? "adjudicated" : f.provenance});
            continue;
        }
        FilterRule rule;
        char id[16];
        std::snprintf(id, sizeof(id), "r%03d", ++spatial_n);
        rule.id = id;
        rule.kind = RuleKind::Spatial;
        rule.provenance = f.provenance.empty() ? "adjudicated" : f.provenance;
        rule.atoms.push_back(Compare{f.attr_a, CompareOp::Eq, f.value_a});
        const std::string& b = f.attr_b;
        switch (p.op) {
            case ValuePredicate::Op::Eq:
                if (p.values.size() != 1) throw DataError("eq finding needs exactly one value");
                rule.atoms.push_back(Compare{b, CompareOp::Eq, p.values.front()});
                break;
            case ValuePredicate::Op::Range: rule.atoms.push_back(Between{b, p.low, p.high}); break;
            case ValuePredicate::Op::Lt: rule.atoms.push_back(Compare{b, CompareOp::Lt, p.low}); break;
            case ValuePredicate::Op::Gt: rule.atoms.push_back(Compare{b, CompareOp::Gt, p.low}); break;
            case ValuePredicate::Op::In:
            case ValuePredicate::Op::NotIn: {
                bool negated = p.op == ValuePredicate::Op::NotIn;
                std::string name;
                if (!p.values.empty()) {
                    if (p.values.size() == 1) {
                        rule.atoms.push_back(Compare{b, negated ? CompareOp::Ne : CompareOp::Eq, p.values.front()});
                        break;
                    }
                    name = sets.fresh(slug(f.attr_a) + "_" + slug(canonical_serialize(f.value_a)) + "_" + slug(b) +
                                          (negated ? "_not_in" : "_in"),
                                      p.values);
                } else if (!p.set.empty()) {
                    const auto* values = kb.set(p.set);
                    if (!values) throw DataError("finding references unknown KB set @" + p.set);
                    name = sets.exact(p.set, *values);
                } else if (!p.catalog.empty()) {
                    const auto* field = catalog_field_by_name(p.catalog);
                    if (!field) throw DataError("unknown catalog field '" + p.catalog + "'");
                    if (f.attr_a != "ua.device")
                        throw DataError("catalog finding must be keyed on ua.device, not '" + f.attr_a + "'");
                    if (field->attribute != b)
                        throw DataError("catalog field '" + p.catalog + "' constrains " + std::string(field->attribute) +
                                        ", not " + b);
                    const auto* device = f.value_a.as_text() ? kb.device(*f.value_a.as_text()) : nullptr;
                    if (!device)
                        throw DataError("device " + canonical_serialize(f.value_a) + " is absent from the KB catalog");
                    auto it = device->find(b);
                    if (it == device->end())
                        throw DataError("catalog entry for " + canonical_serialize(f.value_a) + " has no " + p.catalog);
                    name = sets.exact(it->second.set_name, it->second.values);
                } else if (p.combo) {
                    const auto* valid =
                        f.value_a.as_text() ? kb.combo(f.attr_a, *f.value_a.as_text(), b) : nullptr;
                    if (!valid)
                        throw DataError("no valid_combos entry for " + f.attr_a + "=" + canonical_serialize(f.value_a) +
                                        " and " + b);
                    name = sets.exact(valid->set_name, valid->values);
                } else {
                    throw DataError("membership finding without a value source");
                }
                rule.atoms.push_back(Membership{b, negated, name});
                break;
            }
            case ValuePredicate::Op::OffsetsDisjoint: break;
        }
        rs.rules.push_back(std::move(rule));
    }

    int geo_n = 0;
    for (const auto& g : geo) {
        FilterRule rule;
        char id[16];
        std::snprintf(id, sizeof(id), "g%03d", ++geo_n);
        rule.id = id;
        rule.kind = RuleKind::Geo;
        rule.provenance = g.provenance;
        rule.atoms.push_back(OffsetsDisjoint{g.region_attr, g.zone_attr});
        rs.rules.push_back(std::move(rule));
    }

    std::vector<TemporalDirective> temporal = findings.temporal;
    for (const auto& t : temporal) {
        require_attrs(registry, {&t.watch});
        if (t.key == KeyKind::Ip && t.watch != "timezone" && t.watch != "geolocation.region")
            throw DataError("IP-keyed temporal finding must watch timezone or geolocation.region");
    }
    std::sort(temporal.begin(), temporal.end(), [](const TemporalDirective& x, const TemporalDirective& y) {
        return std::tie(x.key, x.watch) < std::tie(y.key, y.watch);
    });
    temporal.erase(std::unique(temporal.begin(), temporal.end()), temporal.end());
    int temporal_n = 0;
    for (const auto& t : temporal) {
        FilterRule rule;
        char id[16];
        std::snprintf(id, sizeof(id), "t%03d", ++temporal_n);
        rule.id = id;
        rule.kind = RuleKind::Temporal;
        rule.provenance = "temporal";
        rule.directive = t;
        rs.rules.push_back(std::move(rule));
    }
    return rs;
}

}  // namespace fpscan
