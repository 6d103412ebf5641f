#include <doctest.h>

#include "fpscan/engine.hpp"
#include "fpscan/error.hpp"
#include "fpscan/findings.hpp"
#include "fpscan/io.hpp"
#include "fpscan/kb.hpp"
#include "testkit.hpp"

using namespace fpscan;

namespace {

std::vector<Adjudication> reference_adjudication() {
    auto path = std::string(FPSCAN_TEST_DATA) + "/../../data/reference_adjudication.json";
    return adjudications_from_json(nlohmann::json::parse(read_file(path)));
}

ValuePredicate not_in_catalog(const std::string& field) {
    ValuePredicate p;
    p.op = ValuePredicate::Op::NotIn;
    p.catalog = field;
    return p;
}

CandidateReport screen_report() {
    CandidateReport rep;
    rep.category = "Screen";
    rep.attributes = {"ua.device", "screen.resolution", "max_touch_points"};
    PairCount pc;
    pc.attr_a = "ua.device";
    pc.value_a = AttributeValue::text("iPhone");
    pc.attr_b = "screen.resolution";
    pc.values_b = {{AttributeValue::resolution(1170, 2532), 4}, {AttributeValue::resolution(1920, 1080), 3}};
    pc.distinct_b = 2;
    pc.support_a = 7;
    rep.pairs.push_back(pc);
    pc.attr_b = "max_touch_points";
    pc.values_b = {{AttributeValue::integer(5), 7}};
    pc.distinct_b = 1;
    rep.pairs.push_back(pc);
    return rep;
}

}  // namespace

TEST_CASE("golden ruleset is the compiled reference adjudication") {
    FindingsFile f;
    for (const auto& a : reference_adjudication()) {
        auto found = adjudication_findings(a);
        f.spatial.insert(f.spatial.end(), found.begin(), found.end());
    }
    f.temporal = default_temporal_findings();
    auto compiled = compile(f, KnowledgeBase::builtin());
    CHECK(serialize_rules(compiled) == load_data_text("builtin:golden.rules", "golden.rules"));

    // finding order and duplicates do not matter
    auto shuffled = f;
    Rng(3).shuffle(shuffled.spatial);
    shuffled.spatial.push_back(shuffled.spatial.front());
    CHECK(compile(shuffled, KnowledgeBase::builtin()) == compiled);
}

TEST_CASE("empty findings leave only the geo rule") {
    auto rs = compile({}, KnowledgeBase::builtin());
    REQUIRE(rs.rules.size() == 1);
    CHECK(rs.rules[0].kind == RuleKind::Geo);
    CHECK(rs.rules[0].id == "g001");
    CHECK(rs.rules[0].atoms == std::vector<Atom>{OffsetsDisjoint{"ip.location", "timezone"}});
}

TEST_CASE("Safari on non-Apple systems") {
    ValuePredicate p;
    p.op = ValuePredicate::Op::In;
    p.set = "non_apple_os";
    FindingsFile f{{{"ua.browser", AttributeValue::text("Safari"), "ua.os", p, "adjudicated/Browser"}}, {}};
    auto rs = compile(f, KnowledgeBase::builtin());
    auto text = serialize_rules(rs);
    CHECK(text.find("spatial r001 (adjudicated/Browser): ua.browser == \"Safari\" AND ua.os IN @non_apple_os\n") !=
          std::string::npos);
    CHECK(rs.sets.at("non_apple_os") == *KnowledgeBase::builtin().set("non_apple_os"));
}

TEST_CASE("Mac with touch points") {
    ValuePredicate p;
    p.op = ValuePredicate::Op::Gt;
    p.low = AttributeValue::integer(0);
    FindingsFile f{{{"ua.device", AttributeValue::text("Mac"), "max_touch_points", p, ""}}, {}};
    auto rs = compile(f, KnowledgeBase::builtin());
    REQUIRE(rs.find("r001"));
    CHECK(serialize_rule(*rs.find("r001")) == "spatial r001 (adjudicated): ua.device == \"Mac\" AND max_touch_points > 0");
}

TEST_CASE("catalog sets need a catalogued device") {
    FindingsFile f{{{"ua.device", AttributeValue::text("Nokia 3310"), "screen.resolution",
                     not_in_catalog("valid_resolutions"), ""}},
                   {}};
    CHECK_THROWS_AS(compile(f, KnowledgeBase::builtin()), DataError);
    ValuePredicate p;
    p.op = ValuePredicate::Op::In;
    p.set = "no_such_set";
    FindingsFile g{{{"ua.browser", AttributeValue::text("Safari"), "ua.os", p, ""}}, {}};
    CHECK_THROWS_AS(compile(g, KnowledgeBase::builtin()), DataError);
}

TEST_CASE("apply adjudication") {
    auto rep = screen_report();
    Adjudication adj{"Screen", {}};
    CHECK(apply_adjudication(rep, adj).findings.empty());

    adj.entries.push_back({"ua.device", AttributeValue::text("iPhone"), "screen.resolution",
                           not_in_catalog("valid_resolutions"), Verdict3::Inconsistent, ""});
    ValuePredicate five;
    five.op = ValuePredicate::Op::Eq;
    five.values = {AttributeValue::integer(5)};
    adj.entries.push_back(
        {"ua.device", AttributeValue::text("iPhone"), "max_touch_points", five, Verdict3::Consistent, ""});
    auto res = apply_adjudication(rep, adj);
    REQUIRE(res.findings.size() == 1);
    CHECK(res.findings[0].attr_b == "screen.resolution");
    CHECK(res.pending.empty());

    adj.entries[1].verdict = Verdict3::Unknown;
    res = apply_adjudication(rep, adj);
    CHECK(res.findings.size() == 1);
    CHECK(res.pending.size() == 1);

    adj.entries.push_back({"ua.device", AttributeValue::text("iPad"), "screen.resolution",
                           not_in_catalog("valid_resolutions"), Verdict3::Inconsistent, ""});
    CHECK(apply_adjudication(rep, adj).unmatched == 1);

    Adjudication stray{"Screen", {{"ua.device", AttributeValue::text("iPhone"), "device.memory",
                                   not_in_catalog("valid_memory"), Verdict3::Inconsistent, ""}}};
    CHECK_THROWS_AS(apply_adjudication(rep, stray), DataError);
    CHECK_THROWS_AS(apply_adjudication(rep, Adjudication{"Device", {}}), DataError);
}

TEST_CASE("kb adjudication flags values outside the catalog") {
    auto found = kb_adjudicate(screen_report(), KnowledgeBase::builtin());
    REQUIRE(found.size() == 1);
    CHECK(found[0].attr_b == "screen.resolution");
    CHECK(found[0].predicate == not_in_catalog("valid_resolutions"));

    auto rs = compile({found, {}}, KnowledgeBase::builtin());
    auto r = testkit::make_record("x", {{"ua.device", "iPhone"}, {"screen.resolution", "1920x1080"}});
    CHECK(rule_matches(*rs.find("r001"), r, rs));
}

TEST_CASE("findings and adjudications survive json") {
    auto adj = reference_adjudication();
    CHECK(adjudications_from_json(nlohmann::json::parse(adjudications_to_json(adj).dump())) == adj);
    FindingsFile f{adjudication_findings(adj[0]), default_temporal_findings()};
    CHECK(findings_from_json(nlohmann::json::parse(findings_to_json(f).dump())) == f);
    CHECK(default_temporal_findings().size() == 5);
}
