#include <doctest.h>

#include <algorithm>
#include <set>

#include "fpscan/engine.hpp"
#include "fpscan/error.hpp"
#include "fpscan/geo.hpp"
#include "fpscan/record_io.hpp"
#include "fpscan/synth.hpp"

#include <cmath>
#include "testkit.hpp"

using namespace fpscan;

namespace {

// Straightforward interpretation of the rule language, kept apart from
// the engine's compiled matcher.
bool same(const AttributeValue& a, const AttributeValue& b) {
    auto x = a.as_number(), y = b.as_number();
    if (x && y) return *x == *y;
    return a == b && !a.is_absent();
}

bool naive_atom(const Atom& atom, const FingerprintRecord& r, const RuleSet& rs) {
    if (auto* c = std::get_if<Compare>(&atom)) {
        const auto& v = r.get(c->attr);
        if (v.is_absent()) return false;
        switch (c->op) {
            case CompareOp::Eq: return same(v, c->value);
            case CompareOp::Ne: return !same(v, c->value);
            case CompareOp::Lt: return v.as_number() && *v.as_number() < *c->value.as_number();
            case CompareOp::Gt: return v.as_number() && *v.as_number() > *c->value.as_number();
        }
    }
    if (auto* b = std::get_if<Between>(&atom)) {
        auto n = r.get(b->attr).as_number();
        return n && *n >= *b->low.as_number() && *n <= *b->high.as_number();
    }
    if (auto* m = std::get_if<Membership>(&atom)) {
        const auto& v = r.get(m->attr);
        if (v.is_absent()) return false;
        const auto& values = rs.sets.at(m->set);
        bool in = std::any_of(values.begin(), values.end(), [&](const AttributeValue& x) { return same(v, x); });
        return m->negated ? !in : in;
    }
    if (auto* p = std::get_if<Presence>(&atom)) return p->present == !r.get(p->attr).is_absent();
    const auto& o = std::get<OffsetsDisjoint>(atom);
    auto x = OffsetSet::from_value(r.get(o.region_attr + ".offsets"));
    auto y = OffsetSet::from_value(r.get(o.zone_attr + ".offsets"));
    if (!x || !y || x->empty() || y->empty()) return false;
    for (int a : x->values())
        if (y->contains(a)) return false;
    return true;
}

std::vector<std::string> naive_match(const RuleSet& rs, const FingerprintRecord& r) {
    std::vector<std::string> out;
    for (const auto& rule : rs.rules) {
        if (rule.kind == RuleKind::Temporal) continue;
        if (std::all_of(rule.atoms.begin(), rule.atoms.end(), [&](const Atom& a) { return naive_atom(a, r, rs); }))
            out.push_back(rule.id);
    }
    return out;
}

void collect(const AttributeValue& v, std::vector<AttributeValue>& out) {
    if (!v.is_absent()) out.push_back(v);
    if (auto n = v.as_number()) {
        out.push_back(AttributeValue::real(*n));
        out.push_back(AttributeValue::real(*n + 0.25));
        if (*n == std::floor(*n)) out.push_back(AttributeValue::integer(std::int64_t(*n)));
    }
}

// Records whose values are mostly rule literals, so rules actually fire.
FingerprintRecord record_for(const RuleSet& rs, Rng& rng) {
    std::vector<AttributeValue> pool;
    std::set<std::string> attrs;
    for (const auto& [_, values] : rs.sets)
        for (const auto& v : values) collect(v, pool);
    for (const auto& rule : rs.rules)
        for (const auto& atom : rule.atoms)
            std::visit(
                [&](const auto& a) {
                    using T = std::decay_t<decltype(a)>;
                    if constexpr (std::is_same_v<T, Compare>) collect(a.value, pool);
                    if constexpr (std::is_same_v<T, Between>) {
                        collect(a.low, pool);
                        collect(a.high, pool);
                    }
                    if constexpr (!std::is_same_v<T, OffsetsDisjoint>) attrs.insert(a.attr);
                },
                atom);
    FingerprintRecord r;
    r.record_id = "x";
    for (const auto& attr : attrs) {
        auto roll = rng.below(10);
        if (roll == 0) continue;
        if (roll < 8 && !pool.empty())
            r.set(attr, rng.pick(pool));
        else
            r.set(attr, testkit::random_value(rng));
    }
    static const std::vector<std::string> zones = {"Europe/Paris", "America/Los_Angeles", "Asia/Tokyo", "Nowhere/X"};
    static const std::vector<std::string> regions = {"France/Hauts-de-France", "Japan/Tokyo",
                                                     "United States of America/California"};
    if (rng.chance(0.8)) r.set("timezone", AttributeValue::text(rng.pick(zones)));
    if (rng.chance(0.8)) r.set("ip.location", AttributeValue::text(rng.pick(regions)));
    testkit::add_offsets(r);
    return r;
}

const RuleSet& golden() {
    static const RuleSet rs = load_rules("builtin:golden.rules");
    return rs;
}

const RuleEngine& golden_engine() {
    static const RuleEngine e(golden());
    return e;
}

}  // namespace

TEST_CASE("engine agrees with a naive evaluator") {
    Rng rng(41);
    std::size_t matched = 0;
    for (int i = 0; i < 600; ++i) {
        auto rs = testkit::random_ruleset(rng);
        RuleEngine engine(rs);
        for (int k = 0; k < 25; ++k) {
            auto r = record_for(rs, rng);
            auto expected = naive_match(rs, r);
            std::vector<std::string> direct;
            for (const auto& rule : rs.rules)
                if (rule_matches(rule, r, rs)) direct.push_back(rule.id);
            std::vector<std::size_t> idx;
            engine.match(r, idx);
            std::vector<std::string> compiled;
            for (auto j : idx) compiled.push_back(engine.rules()[j].id);
            REQUIRE(direct == expected);
            REQUIRE(compiled == expected);
            matched += !expected.empty();
        }
    }
    CHECK(matched > 1000);
}

TEST_CASE("rule order does not change the matched set") {
    Rng rng(42);
    for (int i = 0; i < 200; ++i) {
        auto rs = testkit::random_ruleset(rng);
        auto reversed = rs;
        std::reverse(reversed.rules.begin(), reversed.rules.end());
        RuleEngine a(rs), b(reversed);
        for (int k = 0; k < 10; ++k) {
            auto r = record_for(rs, rng);
            auto x = a.match_spatial(r), y = b.match_spatial(r);
            std::sort(x.begin(), x.end());
            std::sort(y.begin(), y.end());
            REQUIRE(x == y);
        }
    }
}

TEST_CASE("adding a rule never unmatches") {
    Rng rng(43);
    for (int i = 0; i < 200; ++i) {
        auto rs = testkit::random_ruleset(rng);
        auto extra = testkit::random_ruleset(rng);
        auto grown = rs;
        for (auto& [name, values] : extra.sets) grown.sets.emplace(name, values);
        for (auto rule : extra.rules) {
            rule.id = "extra_" + rule.id;
            for (auto& atom : rule.atoms)
                if (auto* m = std::get_if<Membership>(&atom); m && !grown.sets.count(m->set)) atom = Presence{m->attr, true};
            grown.rules.push_back(rule);
        }
        RuleEngine small(rs), big(grown);
        for (int k = 0; k < 10; ++k) {
            auto r = record_for(rs, rng);
            auto before = small.match_spatial(r), after = big.match_spatial(r);
            for (const auto& id : before) REQUIRE(std::find(after.begin(), after.end(), id) != after.end());
        }
    }
}

TEST_CASE("golden rules on iPhone screens") {
    auto desktop = testkit::make_record("a", {{"ua.device", "iPhone"}, {"screen.resolution", "1920x1080"}});
    CHECK(golden_engine().match_spatial(desktop) == std::vector<std::string>{"r044"});

    auto real = testkit::make_record("b", {{"ua.device", "iPhone"},
                                           {"screen.resolution", "1170x2532"},
                                           {"touch_support", "touchEvent/touchStart"},
                                           {"max_touch_points", "5"}});
    CHECK(golden_engine().match_spatial(real).empty());

    auto unknown = testkit::make_record("c", {{"ua.device", "iPhone"}});
    CHECK(golden_engine().match_spatial(unknown).empty());
}

TEST_CASE("match_geo") {
    auto tor = testkit::make_record("t", {{"ip.location", "France/Hauts-de-France"}, {"timezone", "America/Los_Angeles"}});
    CHECK(match_geo(tor));
    auto local = testkit::make_record("l", {{"ip.location", "Germany/Sachsen"}, {"timezone", "Europe/Berlin"}});
    CHECK_FALSE(match_geo(local));
    auto half = testkit::make_record("h", {{"timezone", "America/Los_Angeles"}});
    CHECK_FALSE(match_geo(half));
    auto unknown_zone = testkit::make_record("u", {{"ip.location", "Germany/Sachsen"}, {"timezone", "Mars/Olympus"}});
    CHECK_FALSE(match_geo(unknown_zone));
}

TEST_CASE("geo flag is symmetric") {
    Rng rng(44);
    for (int i = 0; i < 2000; ++i) {
        auto draw = [&] {
            std::vector<int> v;
            auto n = rng.below(3);
            for (std::uint64_t k = 0; k < n; ++k) v.push_back(int(rng.between(-12, 14)) * 60);
            return OffsetSet::from(v);
        };
        auto x = draw(), y = draw();
        FingerprintRecord a, b;
        a.set("ip.location.offsets", x.to_value());
        a.set("timezone.offsets", y.to_value());
        b.set("ip.location.offsets", y.to_value());
        b.set("timezone.offsets", x.to_value());
        REQUIRE(match_geo(a) == match_geo(b));
        REQUIRE(match_geo(a) == (!x.empty() && !y.empty() && !x.intersects(y)));
    }
}

TEST_CASE("evaluate_record combines the three checks") {
    TemporalState state;
    state.set_config(TemporalConfig::from_directives(golden().temporal_directives()));

    auto tor = testkit::make_record("tor", {{"ip.location", "Germany/Sachsen"}, {"timezone", "America/Los_Angeles"}}, 1);
    tor.ip = "10.2.0.1";
    auto d = evaluate_record(golden_engine(), state, tor);
    CHECK(d.geo_flag);
    CHECK_FALSE(d.spatial_flag);
    CHECK(d.is_bot_by_rules);
    CHECK(d.matched == std::vector<std::string>{"g001"});

    std::vector<std::pair<std::string, std::string>> mac = {
        {"ua.device", "Mac"}, {"screen.resolution", "1440x900"}, {"touch_support", "None"},
        {"max_touch_points", "0"}, {"hardware.concurrency", "8"}, {"device.memory", "8"},
        {"ip.location", "Germany/Sachsen"}, {"timezone", "Europe/Berlin"}, {"platform", "MacIntel"}};
    auto human = testkit::make_record("human", mac, 2);
    human.cookie_id = "brave";
    human.ip = "10.2.0.2";
    d = evaluate_record(golden_engine(), state, human);
    CHECK_FALSE(d.is_bot_by_rules);
    CHECK(d.temporal_flags.empty());

    auto next = human;
    next.record_id = "brave-2";
    next.timestamp_ms = 3;
    next.set("device.memory", testkit::typed("device.memory", "4"));
    d = evaluate_record(golden_engine(), state, next);
    REQUIRE(d.temporal_flags.size() == 1);
    CHECK(d.temporal_flags[0].attribute == "device.memory");
    CHECK(d.is_bot_by_rules);
    CHECK(d.matched.empty());
}

TEST_CASE("rulesets without temporal directives never flag temporally") {
    RuleEngine engine(parse_rules("spatial r1: hdr == true\n"));
    TemporalState state;  // default config watches cookies
    auto a = testkit::make_record("a", {{"hardware.concurrency", "4"}}, 1);
    auto b = testkit::make_record("b", {{"hardware.concurrency", "8"}}, 2);
    a.cookie_id = b.cookie_id = "c";
    CHECK(evaluate_record(engine, state, a).temporal_flags.empty());
    CHECK(evaluate_record(engine, state, b).temporal_flags.empty());
}

TEST_CASE("decision lines match the json form") {
    Rng rng(45);
    for (int i = 0; i < 3000; ++i) {
        DetectionDecision d;
        d.record_id = testkit::random_text(rng, 20) + std::string(1, char(rng.below(32)));
        d.geo_flag = rng.chance(0.5);
        d.spatial_flag = rng.chance(0.5);
        d.is_bot_by_rules = rng.chance(0.5);
        for (std::uint64_t k = rng.below(3); k > 0; --k) d.matched.push_back("r" + testkit::random_text(rng, 3));
        for (std::uint64_t k = rng.below(3); k > 0; --k) {
            TemporalFlag f;
            f.record_id = d.record_id;
            f.key_kind = rng.chance(0.5) ? KeyKind::Cookie : KeyKind::Ip;
            f.attribute = "device.memory";
            f.prior_values = {testkit::random_text(rng, 4), "\t\x7f"};
            f.new_value = testkit::random_text(rng, 6);
            d.temporal_flags.push_back(f);
        }
        auto line = decision_to_line(d);
        REQUIRE(line == decision_to_json(d).dump());
        REQUIRE(decision_from_json(nlohmann::json::parse(line)) == d);
    }
}

TEST_CASE("detect orders by timestamp then id") {
    RuleEngine engine(golden());
    TemporalState state;
    std::vector<FingerprintRecord> rs = {
        testkit::make_record("b", {{"hardware.concurrency", "8"}}, 5),
        testkit::make_record("a", {{"hardware.concurrency", "4"}}, 5),
        testkit::make_record("z", {{"hardware.concurrency", "6"}}, 1),
    };
    for (auto& r : rs) r.cookie_id = "c";
    auto out = detect(engine, state, rs);
    REQUIRE(out.size() == 3);
    CHECK(out[0].record_id == "z");
    CHECK(out[1].record_id == "a");
    CHECK(out[2].record_id == "b");
    CHECK(out[0].temporal_flags.empty());
    CHECK(out[1].temporal_flags.size() == 1);
}

TEST_CASE("detect_jsonl equals detect") {
    SynthConfig cfg;
    cfg.n_humans = 40;
    cfg.n_bots = 60;
    cfg.bot_alteration.alter_prob = 0.4;
    cfg.bot_alteration.geo_mismatch_prob = 0.3;
    cfg.bot_alteration.cookie_retention_prob = 0.7;
    auto records = testkit::normalized(Synthesizer(cfg).gen_records());
    std::string jsonl;
    for (const auto& r : records) jsonl += record_to_line(r) + "\n";
    RuleEngine engine(golden());
    TemporalState s1, s2;
    auto batch = detect(engine, s1, records);
    std::vector<DetectionDecision> streamed;
    auto stats = detect_jsonl(engine, s2, jsonl, [&](const DetectionDecision& d) { streamed.push_back(d); });
    CHECK(stats.records == records.size());
    CHECK(streamed == batch);
    CHECK(s1 == s2);
}
