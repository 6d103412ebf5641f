#include "fpscan/engine.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <variant>

#include "fpscan/error.hpp"
#include "fpscan/geo.hpp"

namespace fpscan {

namespace {

std::uint64_t pack(const Resolution& r) { return (static_cast<std::uint64_t>(r.width) << 32) | r.height; }

bool compare(const AttributeValue& v, CompareOp op, const AttributeValue& lit) {
    if (v.is_absent()) return false;
    auto nv = v.as_number();
    auto nl = lit.as_number();
    switch (op) {
        case CompareOp::Eq: return nv && nl ? *nv == *nl : v == lit;
        case CompareOp::Ne: return nv && nl ? *nv != *nl : !(v == lit);
        case CompareOp::Lt: return nv && nl && *nv < *nl;
        case CompareOp::Gt: return nv && nl && *nv > *nl;
    }
    return false;
}

bool between(const AttributeValue& v, const AttributeValue& low, const AttributeValue& high) {
    auto n = v.as_number();
    auto lo = low.as_number();
    auto hi = high.as_number();
    return n && lo && hi && *lo <= *n && *n <= *hi;
}

std::string offsets_name(std::string_view attr) { return std::string(attr) + ".offsets"; }

struct CompiledAtom {
    enum class Type { Compare, Between, Membership, Presence, Offsets } type;
    std::string attr;
    CompareOp op = CompareOp::Eq;
    AttributeValue a;
    AttributeValue b;
    const ValueSet* set = nullptr;
    bool flag = false;  // negated / present
    std::string region_offsets;
    std::string zone_offsets;

    bool matches(const FingerprintRecord& r) const {
        switch (type) {
            case Type::Compare: return compare(r.get(attr), op, a);
            case Type::Between: return between(r.get(attr), a, b);
            case Type::Membership: {
                const auto& v = r.get(attr);
                if (v.is_absent()) return false;
                return set->contains(v) != flag;
            }
            case Type::Presence: return r.get(attr).is_absent() != flag;
            case Type::Offsets: {
                auto x = OffsetSet::from_value(r.get(region_offsets));
                auto y = OffsetSet::from_value(r.get(zone_offsets));
                return x && y && !x->empty() && !y->empty() && !x->intersects(*y);
            }
        }
        return false;
    }
};

struct CompiledRule {
    std::vector<CompiledAtom> atoms;
    bool geo = false;
};

}  // namespace

ValueSet::ValueSet(const std::vector<AttributeValue>& values) {
    for (const auto& v : values) {
        if (auto n = v.as_number()) numbers_.insert(*n);
        else if (const auto* r = v.as_resolution()) resolutions_.insert(pack(*r));
        else if (const auto* f = v.as_flag()) (*f ? has_true_ : has_false_) = true;
        else if (const auto* t = v.as_text()) texts_.insert(*t);
        else texts_.insert("\x01" + canonical_serialize(v));
    }
}

bool ValueSet::contains(const AttributeValue& v) const {
    if (auto n = v.as_number()) return numbers_.count(*n) > 0;
    if (const auto* r = v.as_resolution()) return resolutions_.count(pack(*r)) > 0;
    if (const auto* f = v.as_flag()) return *f ? has_true_ : has_false_;
    if (const auto* t = v.as_text()) return texts_.count(*t) > 0;
    if (v.is_absent()) return false;
    return texts_.count("\x01" + canonical_serialize(v)) > 0;
}

bool offsets_disjoint(const FingerprintRecord& record, std::string_view region_attr, std::string_view zone_attr) {
    auto x = OffsetSet::from_value(record.get(offsets_name(region_attr)));
    auto y = OffsetSet::from_value(record.get(offsets_name(zone_attr)));
    return x && y && !x->empty() && !y->empty() && !x->intersects(*y);
}

bool match_geo(const FingerprintRecord& record) { return offsets_disjoint(record, "ip.location", "timezone"); }

bool atom_matches(const Atom& atom, const FingerprintRecord& record, const RuleSet& rules) {
    return std::visit(
        [&](const auto& a) -> bool {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, Compare>) {
                return compare(record.get(a.attr), a.op, a.value);
            } else if constexpr (std::is_same_v<T, Between>) {
                return between(record.get(a.attr), a.low, a.high);
            } else if constexpr (std::is_same_v<T, Membership>) {
                const auto& v = record.get(a.attr);
                if (v.is_absent()) return false;
                auto it = rules.sets.find(a.set);
                if (it == rules.sets.end()) throw DataError("undefined set @" + a.set);
                bool in = std::any_of(it->second.begin(), it->second.end(), [&](const AttributeValue& x) {
                    return compare(v, CompareOp::Eq, x);
                });
                return in != a.negated;
            } else if constexpr (std::is_same_v<T, Presence>) {
                return record.get(a.attr).is_absent() != a.present;
            } else {
                return offsets_disjoint(record, a.region_attr, a.zone_attr);
            }
        },
        atom);
}

bool rule_matches(const FilterRule& rule, const FingerprintRecord& record, const RuleSet& rules) {
    if (rule.kind == RuleKind::Temporal) return false;
    return std::all_of(rule.atoms.begin(), rule.atoms.end(),
                       [&](const Atom& a) { return atom_matches(a, record, rules); });
}

struct RuleEngine::Impl {
    std::vector<FilterRule> rules;
    std::vector<TemporalDirective> temporal;
    std::map<std::string, std::unique_ptr<ValueSet>, std::less<>> sets;
    std::vector<CompiledRule> compiled;  // parallel to rules; empty for temporal
    // anchor attribute -> text value -> rule indices
    std::vector<std::pair<std::string, std::unordered_map<std::string, std::vector<std::size_t>>>> anchors;
    std::vector<std::size_t> unanchored;
};

RuleEngine::RuleEngine(const RuleSet& rules) : impl_(std::make_unique<Impl>()) {
    auto& im = *impl_;
    im.rules = rules.rules;
    im.temporal = rules.temporal_directives();
    for (const auto& [name, values] : rules.sets) im.sets.emplace(name, std::make_unique<ValueSet>(values));
    im.compiled.resize(im.rules.size());
    for (std::size_t i = 0; i < im.rules.size(); ++i) {
        const auto& rule = im.rules[i];
        if (rule.kind == RuleKind::Temporal) continue;
        auto& cr = im.compiled[i];
        cr.geo = rule.kind == RuleKind::Geo;
        const Compare* anchor = nullptr;
        for (const auto& atom : rule.atoms) {
            CompiledAtom ca{};
            if (const auto* c = std::get_if<Compare>(&atom)) {
                ca.type = CompiledAtom::Type::Compare;
                ca.attr = c->attr;
                ca.op = c->op;
                ca.a = c->value;
                if (!anchor && c->op == CompareOp::Eq && c->value.as_text()) anchor = c;
            } else if (const auto* b = std::get_if<Between>(&atom)) {
                ca.type = CompiledAtom::Type::Between;
                ca.attr = b->attr;
                ca.a = b->low;
                ca.b = b->high;
            } else if (const auto* m = std::get_if<Membership>(&atom)) {
                auto it = im.sets.find(m->set);
                if (it == im.sets.end()) throw DataError("rule " + rule.id + ": undefined set @" + m->set);
                ca.type = CompiledAtom::Type::Membership;
                ca.attr = m->attr;
                ca.set = it->second.get();
                ca.flag = m->negated;
            } else if (const auto* p = std::get_if<Presence>(&atom)) {
                ca.type = CompiledAtom::Type::Presence;
                ca.attr = p->attr;
                ca.flag = p->present;
            } else {
                const auto& o = std::get<OffsetsDisjoint>(atom);
                ca.type = CompiledAtom::Type::Offsets;
                ca.region_offsets = offsets_name(o.region_attr);
                ca.zone_offsets = offsets_name(o.zone_attr);
            }
            cr.atoms.push_back(std::move(ca));
        }
        if (anchor) {
            auto it = std::find_if(im.anchors.begin(), im.anchors.end(),
                                   [&](const auto& a) { return a.first == anchor->attr; });
            if (it == im.anchors.end()) {
                im.anchors.emplace_back(anchor->attr, std::unordered_map<std::string, std::vector<std::size_t>>{});
                it = std::prev(im.anchors.end());
            }
            it->second[*anchor->value.as_text()].push_back(i);
        } else {
            im.unanchored.push_back(i);
        }
    }
}

RuleEngine::~RuleEngine() = default;
RuleEngine::RuleEngine(RuleEngine&&) noexcept = default;
RuleEngine& RuleEngine::operator=(RuleEngine&&) noexcept = default;

void RuleEngine::match(const FingerprintRecord& record, std::vector<std::size_t>& out) const {
    const auto& im = *impl_;
    out.clear();
    auto test = [&](std::size_t i) {
        const auto& cr = im.compiled[i];
        for (const auto& atom : cr.atoms)
            if (!atom.matches(record)) return;
        out.push_back(i);
    };
    for (const auto& [attr, index] : im.anchors) {
        const auto* text = record.get(attr).as_text();
        if (!text) continue;
        auto it = index.find(*text);
        if (it == index.end()) continue;
        for (auto i : it->second) test(i);
    }
    for (auto i : im.unanchored) test(i);
    std::sort(out.begin(), out.end());
}

std::vector<std::string> RuleEngine::match_spatial(const FingerprintRecord& record) const {
    std::vector<std::size_t> idx;
    match(record, idx);
    std::vector<std::string> out;
    for (auto i : idx)
        if (!impl_->compiled[i].geo) out.push_back(impl_->rules[i].id);
    return out;
}

std::vector<std::string> RuleEngine::match_geo_rules(const FingerprintRecord& record) const {
    std::vector<std::size_t> idx;
    match(record, idx);
    std::vector<std::string> out;
    for (auto i : idx)
        if (impl_->compiled[i].geo) out.push_back(impl_->rules[i].id);
    return out;
}

const std::vector<FilterRule>& RuleEngine::rules() const noexcept { return impl_->rules; }
const std::vector<TemporalDirective>& RuleEngine::temporal() const noexcept { return impl_->temporal; }

DetectionDecision evaluate_record(const RuleEngine& engine, TemporalState& state, const FingerprintRecord& record) {
    DetectionDecision d;
    d.record_id = record.record_id;
    thread_local std::vector<std::size_t> idx;
    engine.match(record, idx);
    for (auto i : idx) {
        const auto& rule = engine.rules()[i];
        d.matched.push_back(rule.id);
        if (rule.kind == RuleKind::Geo) d.geo_flag = true;
        else d.spatial_flag = true;
    }
    if (!engine.temporal().empty()) d.temporal_flags = state.observe(record);
    d.is_bot_by_rules = d.spatial_flag || d.geo_flag || !d.temporal_flags.empty();
    return d;
}

void sort_for_detection(std::vector<FingerprintRecord>& records) {
    std::sort(records.begin(), records.end(), [](const FingerprintRecord& a, const FingerprintRecord& b) {
        if (a.timestamp_ms != b.timestamp_ms) return a.timestamp_ms < b.timestamp_ms;
        return a.record_id < b.record_id;
    });
}

std::vector<DetectionDecision> detect(const RuleEngine& engine, TemporalState& state,
                                      std::vector<FingerprintRecord> records) {
    sort_for_detection(records);
    auto config = TemporalConfig::from_directives(engine.temporal());
    config.ttl_ms = state.config().ttl_ms;
    state.set_config(std::move(config));
    std::vector<DetectionDecision> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(evaluate_record(engine, state, r));
    return out;
}

nlohmann::ordered_json decision_to_json(const DetectionDecision& d) {
    nlohmann::ordered_json flags = nlohmann::ordered_json::array();
    for (const auto& f : d.temporal_flags)
        flags.push_back({{"key", to_string(f.key_kind)},
                         {"attribute", f.attribute},
                         {"prior", f.prior_values},
                         {"new", f.new_value}});
    return {{"record_id", d.record_id},
            {"is_bot_by_rules", d.is_bot_by_rules},
            {"matched", d.matched},
            {"temporal_flags", flags},
            {"geo_flag", d.geo_flag},
            {"spatial_flag", d.spatial_flag}};
}

DetectionDecision decision_from_json(const nlohmann::json& j) {
    DetectionDecision d;
    try {
        d.record_id = j.at("record_id").get<std::string>();
        d.is_bot_by_rules = j.at("is_bot_by_rules").get<bool>();
        d.matched = j.at("matched").get<std::vector<std::string>>();
        d.geo_flag = j.at("geo_flag").get<bool>();
        d.spatial_flag = j.value("spatial_flag", false);
        for (const auto& f : j.at("temporal_flags")) {
            TemporalFlag t;
            t.record_id = d.record_id;
            auto key = f.at("key").get<std::string>();
            if (key != "cookie" && key != "ip") throw DataError("unknown temporal key '" + key + "'");
            t.key_kind = key == "cookie" ? KeyKind::Cookie : KeyKind::Ip;
            t.attribute = f.at("attribute").get<std::string>();
            t.prior_values = f.at("prior").get<std::vector<std::string>>();
            t.new_value = f.at("new").get<std::string>();
            d.temporal_flags.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("decision: ") + e.what());
    }
    return d;
}

namespace {

// Same bytes as nlohmann's dump() for valid UTF-8 input.
void append_json_string(std::string& out, std::string_view s) {
    static constexpr char hex[] = "0123456789abcdef";
    out += '"';
    for (const char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    out += "\\u00";
                    out += hex[c >> 4];
                    out += hex[c & 15];
                } else {
                    out += ch;
                }
        }
    }
    out += '"';
}

void append_string_array(std::string& out, const std::vector<std::string>& values) {
    out += '[';
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) out += ',';
        append_json_string(out, values[i]);
    }
    out += ']';
}

}  // namespace

std::string decision_to_line(const DetectionDecision& d) {
    std::string out;
    out.reserve(128);
    out += "{\"record_id\":";
    append_json_string(out, d.record_id);
    out += ",\"is_bot_by_rules\":";
    out += d.is_bot_by_rules ? "true" : "false";
    out += ",\"matched\":";
    append_string_array(out, d.matched);
    out += ",\"temporal_flags\":[";
    for (std::size_t i = 0; i < d.temporal_flags.size(); ++i) {
        const auto& f = d.temporal_flags[i];
        if (i) out += ',';
        out += "{\"key\":";
        append_json_string(out, to_string(f.key_kind));
        out += ",\"attribute\":";
        append_json_string(out, f.attribute);
        out += ",\"prior\":";
        append_string_array(out, f.prior_values);
        out += ",\"new\":";
        append_json_string(out, f.new_value);
        out += '}';
    }
    out += "],\"geo_flag\":";
    out += d.geo_flag ? "true" : "false";
    out += ",\"spatial_flag\":";
    out += d.spatial_flag ? "true" : "false";
    out += '}';
    return out;
}

std::vector<DetectionDecision> read_decisions(std::istream& in, const std::string& source) {
    std::vector<DetectionDecision> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(decision_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error&) {
            throw ParseError(source, n, 1, "malformed JSON");
        } catch (const DataError& e) {
            throw ParseError(source, n, 1, e.what());
        }
    }
    return out;
}

}  // namespace fpscan
