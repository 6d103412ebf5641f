#include <doctest.h>

#include <cstdlib>

#include "fpscan/error.hpp"
#include "fpscan/geo.hpp"

using namespace fpscan;

TEST_CASE("every shipped zone has one or two offsets") {
    const auto& zones = ZoneTable::builtin().zones();
    CHECK(zones.size() > 300);
    for (const auto& [name, offsets] : zones) {
        INFO(name);
        REQUIRE((offsets.size() == 1 || offsets.size() == 2));
        if (offsets.size() == 2) {
            int d = std::abs(offsets.values()[1] - offsets.values()[0]);
            CHECK((d == 30 || d == 60));
        }
    }
}

TEST_CASE("zone offsets") {
    CHECK(timezone_to_offsets("America/Los_Angeles") == OffsetSet{-480, -420});
    CHECK(timezone_to_offsets("Europe/Paris") == OffsetSet{60, 120});
    CHECK(timezone_to_offsets("UTC") == OffsetSet{0});
    Diagnostics d;
    CHECK(timezone_to_offsets("Mars/Olympus", &d).empty());
    CHECK(d.count("unknown_zone") == 1);
}

TEST_CASE("offset sets") {
    auto s = OffsetSet::parse("120;60;120");
    CHECK(s.values() == std::vector<int>{60, 120});
    CHECK(s.to_string() == "60;120");
    CHECK(OffsetSet::from_value(s.to_value()) == s);
    CHECK(s.intersects(OffsetSet{120, 180}));
    CHECK_FALSE(s.intersects(OffsetSet{-480, -420}));
    CHECK_THROWS_AS(OffsetSet::parse("60;x"), Error);
    CHECK_THROWS_AS(OffsetSet::parse("900"), Error);
}

TEST_CASE("geo lookup") {
    const auto& geo = GeoTable::builtin();
    auto m = lookup_geo("10.1.2.3", geo);
    REQUIRE(m);
    CHECK(m->region == "France/Hauts-de-France");
    CHECK(m->offsets == OffsetSet{60, 120});

    Diagnostics d;
    CHECK_FALSE(lookup_geo("a3f9c0d1e2", geo, &d));
    CHECK(d.count("malformed_ip") == 1);
    CHECK_FALSE(lookup_geo("10.0.0.1", GeoTable{}));
}

TEST_CASE("longest prefix wins") {
    auto t = GeoTable::parse_csv("prefix,region,offsets\n10.0.0.0/8,A/Wide,0\n10.5.0.0/16,B/Narrow,60\n"
                                 "2001:db8::/32,C/Six,-300\n");
    CHECK(lookup_geo("10.5.1.1", t)->region == "B/Narrow");
    CHECK(lookup_geo("10.6.1.1", t)->region == "A/Wide");
    CHECK(lookup_geo("2001:db8::1", t)->region == "C/Six");
    CHECK_FALSE(lookup_geo("11.0.0.1", t));
    CHECK_THROWS_AS(GeoTable::parse_csv("10.0.0.0/8,A/x,0\n10.0.0.0/8,B/y,0\n"), Error);
}
