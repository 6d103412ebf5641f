#include "fpscan/rules.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "fpscan/error.hpp"
#include "fpscan/io.hpp"

namespace fpscan {

namespace {

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9') || c == '.' || c == '-'; }
bool digit(char c) { return c >= '0' && c <= '9'; }

struct SetUse {
    std::string name;
    std::size_t line;
    std::size_t column;
};

// Scannerless recursive descent over one line.
class LineParser {
public:
    LineParser(std::string_view line, std::size_t line_no, const std::string& source, const AttributeRegistry& registry,
               std::vector<SetUse>& set_uses)
        : s_(line), line_(line_no), source_(source), registry_(registry), set_uses_(set_uses) {}

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
    }
    bool at_end() {
        skip_ws();
        return pos_ >= s_.size() || s_[pos_] == '#';
    }
    std::size_t col() const { return pos_ + 1; }

    [[noreturn]] void fail(std::string msg, std::vector<std::string> expected = {}, std::optional<std::size_t> at = {}) {
        throw ParseError(source_, line_, at.value_or(col()), std::move(msg), std::move(expected));
    }

    std::string describe_here() {
        if (at_end()) return "end of line";
        std::size_t end = pos_;
        if (ident_char(s_[end]))
            while (end < s_.size() && ident_char(s_[end])) ++end;
        else
            ++end;
        return "'" + std::string(s_.substr(pos_, end - pos_)) + "'";
    }

    std::optional<std::string> try_ident() {
        skip_ws();
        if (pos_ >= s_.size() || !ident_start(s_[pos_])) return std::nullopt;
        std::size_t start = pos_;
        while (pos_ < s_.size() && ident_char(s_[pos_])) ++pos_;
        return std::string(s_.substr(start, pos_ - start));
    }

    std::string ident(const std::vector<std::string>& expected) {
        auto id = try_ident();
        if (!id) fail("unexpected " + describe_here(), expected);
        return *id;
    }

    bool peek_keyword(std::string_view kw) {
        skip_ws();
        if (s_.substr(pos_, kw.size()) != kw) return false;
        std::size_t after = pos_ + kw.size();
        return after >= s_.size() || !ident_char(s_[after]);
    }

    bool accept(std::string_view token) {
        skip_ws();
        if (s_.substr(pos_, token.size()) == token) {
            pos_ += token.size();
            return true;
        }
        return false;
    }

    void expect(std::string_view token) {
        if (!accept(token)) fail("unexpected " + describe_here(), {"'" + std::string(token) + "'"});
    }

    void expect_end() {
        if (!at_end()) fail("unexpected " + describe_here(), {"end of line"});
    }

    std::string attribute() {
        skip_ws();
        std::size_t at = col();
        auto name = ident({"attribute name"});
        if (!registry_.contains(name)) fail("unknown attribute '" + name + "'", {"registered attribute"}, at);
        return name;
    }

    std::string set_ref() {
        skip_ws();
        std::size_t at = col();
        if (!accept("@")) fail("unexpected " + describe_here(), {"@set"});
        if (pos_ >= s_.size() || !ident_start(s_[pos_])) fail("unexpected " + describe_here(), {"set name"});
        auto name = *try_ident();
        set_uses_.push_back({name, line_, at});
        return name;
    }

    AttributeValue literal(bool numeric_only = false) {
        skip_ws();
        std::vector<std::string> expected = numeric_only ? std::vector<std::string>{"number"}
                                                         : std::vector<std::string>{"quoted string", "number", "WxH",
                                                                                    "true", "false"};
        if (pos_ >= s_.size()) fail("unexpected end of line", expected);
        char c = s_[pos_];
        if (c == '"' && !numeric_only) return quoted();
        if (digit(c) || c == '-') {
            auto v = number_or_resolution();
            if (numeric_only && !v.as_number()) fail("expected a number", {"number"}, col());
            return v;
        }
        if (!numeric_only) {
            if (peek_keyword("true")) {
                pos_ += 4;
                return AttributeValue::flag(true);
            }
            if (peek_keyword("false")) {
                pos_ += 5;
                return AttributeValue::flag(false);
            }
        }
        fail("unexpected " + describe_here(), expected);
    }

    AttributeValue quoted() {
        std::size_t start = col();
        ++pos_;
        std::string out;
        while (true) {
            if (pos_ >= s_.size()) fail("unterminated string", {"'\"'"});
            char c = s_[pos_++];
            if (c == '"') break;
            if (c == '\\') {
                if (pos_ >= s_.size()) fail("unterminated string", {"'\"'"});
                char e = s_[pos_++];
                switch (e) {
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case 'r': out += '\r'; break;
                    default: fail("unknown escape '\\" + std::string(1, e) + "'", {"\\\"", "\\\\", "\\n", "\\t", "\\r"}, pos_ - 1);
                }
            } else {
                out += c;
            }
        }
        (void)start;
        return AttributeValue::text(std::move(out));
    }

    AttributeValue number_or_resolution() {
        std::size_t start = pos_;
        std::size_t at = col();
        if (s_[pos_] == '-') ++pos_;
        std::size_t digits_start = pos_;
        while (pos_ < s_.size() && digit(s_[pos_])) ++pos_;
        if (pos_ == digits_start) fail("expected digits", {"number"}, pos_ + 1);
        if (s_[start] != '-' && pos_ < s_.size() && s_[pos_] == 'x') {
            std::size_t w_end = pos_;
            ++pos_;
            std::size_t h_start = pos_;
            while (pos_ < s_.size() && digit(s_[pos_])) ++pos_;
            if (pos_ == h_start) fail("expected resolution height", {"WxH"}, pos_ + 1);
            std::uint64_t w = 0, h = 0;
            auto r1 = std::from_chars(s_.data() + start, s_.data() + w_end, w);
            auto r2 = std::from_chars(s_.data() + h_start, s_.data() + pos_, h);
            if (r1.ec != std::errc() || r2.ec != std::errc() || w == 0 || h == 0 || w > 0xffffffffu || h > 0xffffffffu)
                fail("invalid resolution", {"WxH"}, at);
            check_token_end();
            return AttributeValue::resolution(static_cast<std::uint32_t>(w), static_cast<std::uint32_t>(h));
        }
        bool real = false;
        if (pos_ < s_.size() && s_[pos_] == '.') {
            real = true;
            ++pos_;
            std::size_t frac = pos_;
            while (pos_ < s_.size() && digit(s_[pos_])) ++pos_;
            if (pos_ == frac) fail("expected digits after '.'", {"number"}, pos_ + 1);
        }
        if (pos_ < s_.size() && (s_[pos_] == 'e' || s_[pos_] == 'E')) {
            real = true;
            ++pos_;
            if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) ++pos_;
            std::size_t exp = pos_;
            while (pos_ < s_.size() && digit(s_[pos_])) ++pos_;
            if (pos_ == exp) fail("expected exponent digits", {"number"}, pos_ + 1);
        }
        check_token_end();
        std::string_view text = s_.substr(start, pos_ - start);
        if (real) {
            double d = 0;
            auto r = std::from_chars(text.data(), text.data() + text.size(), d);
            if (r.ec != std::errc() || !std::isfinite(d)) fail("number out of range", {"number"}, at);
            return AttributeValue::real(d);
        }
        std::int64_t i = 0;
        auto r = std::from_chars(text.data(), text.data() + text.size(), i);
        if (r.ec != std::errc()) fail("integer out of range", {"number"}, at);
        return AttributeValue::integer(i);
    }

    void check_token_end() {
        if (pos_ < s_.size() && ident_char(s_[pos_])) fail("malformed literal", {"number", "WxH"});
    }

    Atom atom() {
        skip_ws();
        std::size_t at = col();
        if (peek_keyword("offsets_disjoint")) {
            pos_ += std::string_view("offsets_disjoint").size();
            expect("(");
            auto region = offsets_attribute();
            expect(",");
            auto zone = offsets_attribute();
            expect(")");
            return OffsetsDisjoint{std::move(region), std::move(zone)};
        }
        if (at_end()) fail("unexpected end of line", {"attribute name", "offsets_disjoint"}, at);
        auto attr = attribute();
        skip_ws();
        if (accept("==")) return Compare{attr, CompareOp::Eq, literal()};
        if (accept("!=")) return Compare{attr, CompareOp::Ne, literal()};
        if (accept("<")) return Compare{attr, CompareOp::Lt, literal(true)};
        if (accept(">")) return Compare{attr, CompareOp::Gt, literal(true)};
        if (peek_keyword("IN")) {
            pos_ += 2;
            return Membership{attr, false, set_ref()};
        }
        if (peek_keyword("NOT")) {
            pos_ += 3;
            if (!peek_keyword("IN")) fail("unexpected " + describe_here(), {"IN"});
            pos_ += 2;
            return Membership{attr, true, set_ref()};
        }
        if (peek_keyword("BETWEEN")) {
            pos_ += 7;
            auto low = literal(true);
            auto high = literal(true);
            return Between{attr, std::move(low), std::move(high)};
        }
        if (peek_keyword("ABSENT")) {
            pos_ += 6;
            return Presence{attr, false};
        }
        if (peek_keyword("PRESENT")) {
            pos_ += 7;
            return Presence{attr, true};
        }
        fail("unexpected " + describe_here(),
             {"'=='", "'!='", "'<'", "'>'", "IN", "NOT IN", "BETWEEN", "ABSENT", "PRESENT"});
    }

    std::string offsets_attribute() {
        skip_ws();
        std::size_t at = col();
        auto name = attribute();
        if (!registry_.contains(name + ".offsets"))
            fail("attribute '" + name + "' has no derived offsets", {"ip.location", "timezone"}, at);
        return name;
    }

    std::vector<Atom> conjunction() {
        std::vector<Atom> atoms;
        atoms.push_back(atom());
        while (!at_end()) {
            if (!peek_keyword("AND")) fail("unexpected " + describe_here(), {"AND", "end of line"});
            pos_ += 3;
            atoms.push_back(atom());
        }
        return atoms;
    }

    TemporalDirective directive() {
        TemporalDirective d;
        if (!peek_keyword("key")) fail("unexpected " + describe_here(), {"key="});
        pos_ += 3;
        expect("=");
        skip_ws();
        if (peek_keyword("cookie")) {
            pos_ += 6;
            d.key = KeyKind::Cookie;
        } else if (peek_keyword("ip")) {
            pos_ += 2;
            d.key = KeyKind::Ip;
        } else {
            fail("unexpected " + describe_here(), {"cookie", "ip"});
        }
        if (!peek_keyword("watch")) fail("unexpected " + describe_here(), {"watch="});
        pos_ += 5;
        expect("=");
        d.watch = attribute();
        expect_end();
        return d;
    }

    std::string provenance() {
        skip_ws();
        if (pos_ >= s_.size() || s_[pos_] != '(') return {};
        ++pos_;
        auto close = s_.find(')', pos_);
        if (close == std::string_view::npos) fail("unterminated provenance", {"')'"}, s_.size() + 1);
        std::string out(s_.substr(pos_, close - pos_));
        pos_ = close + 1;
        return out;
    }

    std::string_view s_;
    std::size_t pos_ = 0;
    std::size_t line_;
    const std::string& source_;
    const AttributeRegistry& registry_;
    std::vector<SetUse>& set_uses_;
};

bool has_offsets_atom(const std::vector<Atom>& atoms) {
    return std::any_of(atoms.begin(), atoms.end(),
                       [](const Atom& a) { return std::holds_alternative<OffsetsDisjoint>(a); });
}

std::string quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\t': out += "\\t"; break;
            case '\r': out += "\\r"; break;
            default: out += c;
        }
    }
    return out + "\"";
}

}  // namespace

std::string_view to_string(RuleKind kind) {
    switch (kind) {
        case RuleKind::Spatial: return "spatial";
        case RuleKind::Geo: return "geo";
        case RuleKind::Temporal: return "temporal";
    }
    return "spatial";
}

std::string_view to_string(KeyKind kind) { return kind == KeyKind::Cookie ? "cookie" : "ip"; }

std::string_view to_string(CompareOp op) {
    switch (op) {
        case CompareOp::Eq: return "==";
        case CompareOp::Ne: return "!=";
        case CompareOp::Lt: return "<";
        case CompareOp::Gt: return ">";
    }
    return "==";
}

const FilterRule* RuleSet::find(std::string_view id) const {
    for (const auto& r : rules)
        if (r.id == id) return &r;
    return nullptr;
}

std::size_t RuleSet::count(RuleKind kind) const {
    return static_cast<std::size_t>(
        std::count_if(rules.begin(), rules.end(), [&](const FilterRule& r) { return r.kind == kind; }));
}

std::vector<TemporalDirective> RuleSet::temporal_directives() const {
    std::vector<TemporalDirective> out;
    for (const auto& r : rules)
        if (r.kind == RuleKind::Temporal && r.directive) out.push_back(*r.directive);
    return out;
}

RuleSet parse_rules(std::string_view text, const AttributeRegistry& registry, const std::string& source) {
    RuleSet rs;
    std::vector<SetUse> set_uses;
    std::set<std::string, std::less<>> ids;
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        LineParser p(line, line_no, source, registry, set_uses);
        if (!p.at_end()) {
            std::size_t kind_col = p.col();
            auto word = p.ident({"spatial", "geo", "temporal", "set"});
            if (word == "set") {
                p.skip_ws();
                std::size_t at = p.col();
                if (!p.accept("@")) p.fail("unexpected " + p.describe_here(), {"@set"});
                auto name = p.try_ident();
                if (!name) p.fail("unexpected " + p.describe_here(), {"set name"});
                if (rs.sets.count(*name)) p.fail("duplicate set '@" + *name + "'", {}, at);
                p.expect(":");
                std::vector<AttributeValue> values;
                if (!p.at_end()) {
                    values.push_back(p.literal());
                    while (!p.at_end()) {
                        p.expect(",");
                        values.push_back(p.literal());
                    }
                }
                rs.sets.emplace(std::move(*name), std::move(values));
            } else if (word == "spatial" || word == "geo" || word == "temporal") {
                FilterRule rule;
                rule.kind = word == "spatial" ? RuleKind::Spatial : word == "geo" ? RuleKind::Geo : RuleKind::Temporal;
                p.skip_ws();
                std::size_t id_col = p.col();
                rule.id = p.ident({"rule id"});
                if (ids.count(rule.id)) p.fail("duplicate rule id '" + rule.id + "'", {}, id_col);
                rule.provenance = p.provenance();
                p.expect(":");
                p.skip_ws();
                std::size_t body_col = p.col();
                if (rule.kind == RuleKind::Temporal) {
                    rule.directive = p.directive();
                } else {
                    rule.atoms = p.conjunction();
                    bool geo = has_offsets_atom(rule.atoms);
                    if (rule.kind == RuleKind::Geo && !geo)
                        p.fail("geo rule needs an offsets_disjoint atom", {"offsets_disjoint"}, body_col);
                    if (rule.kind == RuleKind::Spatial && geo)
                        p.fail("offsets_disjoint is only allowed in geo rules", {}, body_col);
                }
                ids.insert(rule.id);
                rs.rules.push_back(std::move(rule));
            } else {
                p.fail("unexpected '" + word + "'", {"spatial", "geo", "temporal", "set"}, kind_col);
            }
        }
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    for (const auto& use : set_uses)
        if (!rs.sets.count(use.name))
            throw ParseError(source, use.line, use.column, "undefined set '@" + use.name + "'", {"declared set"});
    return rs;
}

RuleSet load_rules(const std::string& spec, const AttributeRegistry& registry) {
    return parse_rules(load_data_text(spec, "golden.rules"), registry, spec.empty() ? "builtin:golden.rules" : spec);
}

std::string serialize_literal(const AttributeValue& value) {
    switch (value.kind()) {
        case ValueKind::Text: return quote(*value.as_text());
        case ValueKind::Integer:
        case ValueKind::Real:
        case ValueKind::Flag:
        case ValueKind::Resolution: return canonical_serialize(value);
        default: throw Error("value kind " + std::string(to_string(value.kind())) + " cannot appear in a rule");
    }
}

std::string serialize_atom(const Atom& atom) {
    return std::visit(
        [](const auto& a) -> std::string {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, Compare>) {
                return a.attr + " " + std::string(to_string(a.op)) + " " + serialize_literal(a.value);
            } else if constexpr (std::is_same_v<T, Between>) {
                return a.attr + " BETWEEN " + serialize_literal(a.low) + " " + serialize_literal(a.high);
            } else if constexpr (std::is_same_v<T, Membership>) {
                return a.attr + (a.negated ? " NOT IN @" : " IN @") + a.set;
            } else if constexpr (std::is_same_v<T, Presence>) {
                return a.attr + (a.present ? " PRESENT" : " ABSENT");
            } else {
                return "offsets_disjoint(" + a.region_attr + ", " + a.zone_attr + ")";
            }
        },
        atom);
}

std::string serialize_rule(const FilterRule& rule) {
    if (rule.provenance.find_first_of(")\n") != std::string::npos)
        throw Error("rule " + rule.id + ": provenance must not contain ')' or a newline");
    std::string out = std::string(to_string(rule.kind)) + " " + rule.id;
    if (!rule.provenance.empty()) out += " (" + rule.provenance + ")";
    out += ": ";
    if (rule.kind == RuleKind::Temporal) {
        if (!rule.directive) throw Error("temporal rule " + rule.id + " has no directive");
        out += "key=" + std::string(to_string(rule.directive->key)) + " watch=" + rule.directive->watch;
        return out;
    }
    for (std::size_t i = 0; i < rule.atoms.size(); ++i) {
        if (i > 0) out += " AND ";
        out += serialize_atom(rule.atoms[i]);
    }
    return out;
}

std::string serialize_rules(const RuleSet& rules) {
    std::string out;
    for (const auto& [name, values] : rules.sets) {
        out += "set @" + name + ":";
        for (std::size_t i = 0; i < values.size(); ++i) out += (i == 0 ? " " : ", ") + serialize_literal(values[i]);
        out += "\n";
    }
    if (!rules.sets.empty() && !rules.rules.empty()) out += "\n";
    for (const auto& r : rules.rules) out += serialize_rule(r) + "\n";
    return out;
}

std::vector<std::string> canonical_rule_forms(const RuleSet& rules) {
    auto set_text = [&](const std::string& name) {
        std::vector<std::string> items;
        if (auto it = rules.sets.find(name); it != rules.sets.end())
            for (const auto& v : it->second) items.push_back(serialize_literal(v));
        std::sort(items.begin(), items.end());
        items.erase(std::unique(items.begin(), items.end()), items.end());
        std::string out = "{";
        for (std::size_t i = 0; i < items.size(); ++i) out += (i ? ", " : "") + items[i];
        return out + "}";
    };
    std::vector<std::string> forms;
    for (const auto& r : rules.rules) {
        std::string form = std::string(to_string(r.kind)) + ":";
        if (r.directive) {
            form += " key=" + std::string(to_string(r.directive->key)) + " watch=" + r.directive->watch;
        } else {
            std::vector<std::string> atoms;
            for (const auto& a : r.atoms) {
                if (const auto* m = std::get_if<Membership>(&a))
                    atoms.push_back(m->attr + (m->negated ? " NOT IN " : " IN ") + set_text(m->set));
                else
                    atoms.push_back(serialize_atom(a));
            }
            for (std::size_t i = 0; i < atoms.size(); ++i) form += (i ? " AND " : " ") + atoms[i];
        }
        forms.push_back(std::move(form));
    }
    std::sort(forms.begin(), forms.end());
    return forms;
}

}  // namespace fpscan
