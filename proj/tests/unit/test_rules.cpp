#include <doctest.h>

#include <sstream>

#include "fpscan/error.hpp"
#include "fpscan/io.hpp"
#include "fpscan/rules.hpp"
#include "testkit.hpp"

using namespace fpscan;

TEST_CASE("single spatial rule") {
    auto rs = parse_rules(
        "set @iphone_resolutions: 1170x2532\n"
        "spatial r1: ua.device == \"iPhone\" AND screen.resolution NOT IN @iphone_resolutions\n");
    REQUIRE(rs.rules.size() == 1);
    const auto& r = rs.rules[0];
    CHECK(r.id == "r1");
    CHECK(r.kind == RuleKind::Spatial);
    REQUIRE(r.atoms.size() == 2);
    CHECK(std::get<Compare>(r.atoms[0]) == Compare{"ua.device", CompareOp::Eq, AttributeValue::text("iPhone")});
    CHECK(std::get<Membership>(r.atoms[1]) == Membership{"screen.resolution", true, "iphone_resolutions"});
}

TEST_CASE("empty and comment-only input") {
    CHECK(parse_rules("") == RuleSet{});
    CHECK(parse_rules("# nothing\n\n   \n# here\n") == RuleSet{});
}

TEST_CASE("sets may be declared after use") {
    auto rs = parse_rules("spatial a: device.memory IN @m\nset @m: 2, 4.0\n");
    CHECK(rs.sets.at("m").size() == 2);
}

TEST_CASE("dangling AND errors at end of line") {
    const std::string text = "spatial r2: ua.device == \"iPhone\" AND";
    try {
        parse_rules(text);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 1);
        CHECK(e.column() == text.size() + 1);
        CHECK(std::find(e.expected().begin(), e.expected().end(), "attribute name") != e.expected().end());
    }
}

TEST_CASE("malformed corpus yields positioned errors") {
    auto cases = testkit::malformed_rule_cases();
    REQUIRE(cases.size() == 30);
    for (const auto& c : cases) {
        INFO(c.text);
        try {
            parse_rules(c.text, AttributeRegistry::builtin(), "bad.rules");
            FAIL("accepted malformed input");
        } catch (const ParseError& e) {
            CHECK(e.source() == "bad.rules");
            CHECK(e.line() == c.line);
            CHECK(e.column() == c.column);
            CHECK_FALSE(e.detail().empty());
        }
    }
}

TEST_CASE("parse after serialize is the identity on generated rulesets") {
    Rng rng(31);
    for (int i = 0; i < 1000; ++i) {
        auto rs = testkit::random_ruleset(rng);
        auto text = serialize_rules(rs);
        INFO(text);
        auto back = parse_rules(text);
        REQUIRE(back == rs);
        REQUIRE(serialize_rules(back) == text);
    }
}

TEST_CASE("whitespace does not matter") {
    auto a = parse_rules("set @s: 1,2\nspatial r1 (p): device.memory IN @s AND hdr == true\n");
    auto b = parse_rules("  set   @s :1 ,  2  \n\tspatial  r1  (p)  :  device.memory   IN  @s   AND hdr==true   \n");
    CHECK(a == b);
}

TEST_CASE("literals") {
    auto rs = parse_rules(
        "spatial r1: color_depth == -3 AND device.memory == 0.5 AND device.memory != 1e3 AND hdr != false "
        "AND platform == \"a\\\"b\\\\c\\n\" AND screen.resolution == 10x20\n");
    const auto& atoms = rs.rules[0].atoms;
    CHECK(std::get<Compare>(atoms[0]).value == AttributeValue::integer(-3));
    CHECK(std::get<Compare>(atoms[1]).value == AttributeValue::real(0.5));
    CHECK(std::get<Compare>(atoms[2]).value == AttributeValue::real(1000.0));
    CHECK(std::get<Compare>(atoms[3]).value == AttributeValue::flag(false));
    CHECK(std::get<Compare>(atoms[4]).value == AttributeValue::text("a\"b\\c\n"));
    CHECK(std::get<Compare>(atoms[5]).value == AttributeValue::resolution(10, 20));
}

TEST_CASE("canonical forms ignore naming and order") {
    auto a = parse_rules("set @x: 2, 1\nspatial r1: device.memory IN @x\nspatial r2: hdr ABSENT\n");
    auto b = parse_rules("spatial zz: hdr ABSENT\nset @other: 1, 2\nspatial yy: device.memory IN @other\n");
    CHECK(canonical_rule_forms(a) == canonical_rule_forms(b));
}

TEST_CASE("golden ruleset is well formed") {
    auto rs = load_rules("builtin:golden.rules");
    CHECK(rs.count(RuleKind::Spatial) == 45);
    CHECK(rs.count(RuleKind::Geo) == 1);
    CHECK(rs.count(RuleKind::Temporal) == 5);
    CHECK(parse_rules(serialize_rules(rs)) == rs);
    CHECK(rs.find("r044"));
}
