#include <doctest.h>

#include <json.hpp>

#include "fpscan/io.hpp"
#include "fpscan/ua.hpp"
#include "testkit.hpp"

using namespace fpscan;

TEST_CASE("ua fixture agrees with the reference parser") {
    auto fixture = nlohmann::json::parse(read_file(testkit::data_path("ua_fixture.json")));
    REQUIRE(fixture.size() >= 50);
    for (const auto& row : fixture) {
        auto ua = row["ua"].get<std::string>();
        auto f = parse_user_agent(ua);
        INFO(ua);
        CHECK(f.device == row["device"].get<std::string>());
        CHECK(f.browser == row["browser"].get<std::string>());
        CHECK(f.os == row["os"].get<std::string>());
    }
}

TEST_CASE("empty ua") {
    auto f = parse_user_agent("");
    CHECK(f.device == "Unknown");
    CHECK(f.browser == "Unknown");
    CHECK(f.os == "Unknown");
}

TEST_CASE("contradictory claims are kept") {
    auto f = parse_user_agent(
        "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/605.1.15 (KHTML, like Gecko) Version/16.0 Safari/605.1.15");
    CHECK(f.browser == "Safari");
    CHECK(f.os == "Linux");
}

TEST_CASE("device brands") {
    CHECK(device_brand("iPhone") == "Apple");
    CHECK(device_brand("Samsung SM-A515F") == "Samsung");
    CHECK(device_brand("Pixel 7 Pro") == "Google");
    CHECK(device_brand("Zorg 9000") == "Unknown");
}
