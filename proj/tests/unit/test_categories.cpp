#include <doctest.h>

#include "fpscan/categories.hpp"
#include "fpscan/error.hpp"
#include "fpscan/registry.hpp"

using namespace fpscan;

TEST_CASE("shipped categories") {
    const auto& cats = default_categories();
    REQUIRE(cats.categories.size() == 4);
    CHECK(cats.categories[0].name == "Screen");
    CHECK(cats.categories[1].name == "Device");
    CHECK(cats.categories[2].name == "Browser");
    const auto* loc = cats.find("Location");
    REQUIRE(loc);
    CHECK(loc->attributes == std::vector<std::string>{"ip.location", "timezone", "languages"});
    // ua.device sits in more than one group
    int with_device = 0;
    for (const auto& c : cats.categories)
        for (const auto& a : c.attributes) with_device += a == "ua.device";
    CHECK(with_device >= 2);
}

TEST_CASE("empty category files") {
    CHECK(parse_categories("", AttributeRegistry::builtin()).empty());
    CHECK(parse_categories("  \n\t", AttributeRegistry::builtin()).empty());
    CHECK(parse_categories("{}", AttributeRegistry::builtin()).empty());
}

TEST_CASE("unknown attribute names are listed") {
    try {
        parse_categories(R"({"Screen": ["ua.devcie", "screen.resolution", "zz"]})", AttributeRegistry::builtin());
        FAIL("expected an error");
    } catch (const UnknownAttributeError& e) {
        CHECK(e.names() == std::vector<std::string>{"ua.devcie", "zz"});
    }
}

TEST_CASE("malformed category json carries a position") {
    try {
        parse_categories("{\n  \"Screen\": [\"ua.device\",\n}", AttributeRegistry::builtin(), "cats.json");
        FAIL("expected an error");
    } catch (const ParseError& e) {
        CHECK(e.source() == "cats.json");
        CHECK(e.line() == 3);
    }
}
