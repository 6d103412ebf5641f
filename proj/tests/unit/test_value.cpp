#include <doctest.h>

#include <set>
#include <unordered_map>

#include "fpscan/error.hpp"
#include "fpscan/value.hpp"
#include "testkit.hpp"

using namespace fpscan;

TEST_CASE("canonical forms") {
    CHECK(canonical_serialize(AttributeValue::resolution(1920, 1080)) == "1920x1080");
    CHECK(canonical_serialize(AttributeValue::absent()) == "\xE2\x8A\xA5");
    CHECK(canonical_serialize(AttributeValue::text_list({"en-US", "en"})) == "[en-US,en]");
    CHECK(canonical_serialize(AttributeValue::integer(-12)) == "-12");
    CHECK(canonical_serialize(AttributeValue::real(8.0)) == "8.0");
    CHECK(canonical_serialize(AttributeValue::real(0.5)) == "0.5");
    CHECK(canonical_serialize(AttributeValue::flag(true)) == "true");
    CHECK(canonical_serialize(AttributeValue::text("iPhone")) == "iPhone");
    CHECK(canonical_serialize(AttributeValue::text_list({})) == "[]");
}

TEST_CASE("text that looks like another kind is quoted") {
    for (const char* s : {"12", "true", "1920x1080", "[a]", "\xE2\x8A\xA5", "\"x", "8.0"}) {
        auto v = AttributeValue::text(s);
        auto c = canonical_serialize(v);
        CHECK(c != s);
        CHECK(parse_canonical(c) == v);
    }
}

TEST_CASE("empty text") {
    CHECK(parse_canonical(canonical_serialize(AttributeValue::text(""))) == AttributeValue::text(""));
}

TEST_CASE("invalid values are rejected") {
    CHECK_THROWS_AS(AttributeValue::real(std::nan("")), Error);
    CHECK_THROWS_AS(AttributeValue::real(INFINITY), Error);
    CHECK_THROWS_AS(AttributeValue::resolution(0, 10), Error);
    CHECK_THROWS_AS(parse_canonical("\"unterminated"), ParseError);
}

TEST_CASE("round-trip and injectivity over generated values") {
    Rng rng(7);
    std::unordered_map<std::string, AttributeValue> seen;
    std::size_t distinct = 0;
    for (int i = 0; i < 100000; ++i) {
        auto v = testkit::random_value(rng);
        auto s = canonical_serialize(v);
        REQUIRE(parse_canonical(s) == v);
        auto [it, fresh] = seen.emplace(s, v);
        if (fresh)
            ++distinct;
        else
            REQUIRE(it->second == v);  // same string, same value
    }
    CHECK(distinct > 50000);
}

TEST_CASE("kind names") {
    for (auto k : {ValueKind::Absent, ValueKind::Text, ValueKind::Integer, ValueKind::Real, ValueKind::Flag,
                   ValueKind::TextList, ValueKind::Resolution})
        CHECK(parse_value_kind(to_string(k)) == k);
    CHECK_FALSE(parse_value_kind("colour"));
}
