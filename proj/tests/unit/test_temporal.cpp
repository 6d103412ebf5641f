#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "fpscan/error.hpp"
#include "fpscan/temporal.hpp"
#include "testkit.hpp"

using namespace fpscan;

namespace {

FingerprintRecord req(const std::string& id, std::int64_t ts, std::optional<std::string> cookie,
                      std::vector<std::pair<std::string, std::string>> attrs, const std::string& ip = "") {
    auto r = testkit::make_record(id, std::move(attrs), ts);
    r.cookie_id = std::move(cookie);
    r.ip = ip;
    return r;
}

std::size_t replay(TemporalState& s, const std::vector<FingerprintRecord>& rs) {
    std::size_t n = 0;
    for (const auto& r : rs) n += s.observe(r).size();
    return n;
}

std::vector<std::string> flag_keys(TemporalState& s, const std::vector<FingerprintRecord>& rs) {
    std::vector<std::string> out;
    for (const auto& r : rs)
        for (const auto& f : s.observe(r)) out.push_back(f.record_id + "|" + f.attribute + "|" + f.new_value);
    std::sort(out.begin(), out.end());
    return out;
}

// Mixed stream over a few cookies and IPs.
std::vector<FingerprintRecord> random_stream(Rng& rng, std::size_t n, std::size_t keys) {
    static const std::vector<std::string> zones = {"Europe/Paris", "Europe/London", "America/Los_Angeles",
                                                   "Asia/Tokyo", "UTC"};
    static const std::vector<std::string> platforms = {"Win32", "MacIntel", "iPhone"};
    std::vector<FingerprintRecord> out;
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<std::string, std::string>> attrs = {
            {"hardware.concurrency", std::to_string(2 << rng.below(3))},
            {"timezone", rng.pick(zones)},
        };
        if (rng.chance(0.9)) attrs.push_back({"platform", rng.pick(platforms)});
        if (rng.chance(0.3)) attrs.push_back({"geolocation.region", rng.chance(0.5) ? "FR/IDF" : "US/CA"});
        std::optional<std::string> cookie;
        if (rng.chance(0.8)) cookie = "c" + std::to_string(rng.below(keys));
        out.push_back(req("r" + std::to_string(i), std::int64_t(i) * 10, cookie, attrs,
                          "10.9.0." + std::to_string(rng.below(keys))));
    }
    return out;
}

}  // namespace

TEST_CASE("concurrency change under one cookie") {
    TemporalState s;
    CHECK(s.observe(req("a", 1, "c1", {{"hardware.concurrency", "4"}})).empty());
    auto flags = s.observe(req("b", 2, "c1", {{"hardware.concurrency", "6"}}));
    REQUIRE(flags.size() == 1);
    CHECK(flags[0].record_id == "b");
    CHECK(flags[0].key_kind == KeyKind::Cookie);
    CHECK(flags[0].attribute == "hardware.concurrency");
    CHECK(flags[0].prior_values == std::vector<std::string>{"4"});
    CHECK(flags[0].new_value == "6");
    CHECK(s.observe(req("c", 3, "c1", {{"hardware.concurrency", "4"}})).empty());
    CHECK(s.observe(req("d", 4, "c2", {{"hardware.concurrency", "12"}})).empty());
}

TEST_CASE("constant attributes never flag") {
    TemporalState s;
    std::vector<FingerprintRecord> rs;
    for (int i = 0; i < 100; ++i) rs.push_back(req("p" + std::to_string(i), i, "c", {{"platform", "iPhone"}}));
    CHECK(replay(s, rs) == 0);
}

TEST_CASE("alternating platforms") {
    const std::vector<std::string> cycle = {"Win32", "Linux armv8l", "iPhone"};
    for (std::size_t n : {1u, 2u, 3u, 4u, 9u, 30u}) {
        TemporalState s;
        std::vector<FingerprintRecord> rs;
        for (std::size_t i = 0; i < n; ++i)
            rs.push_back(req("p" + std::to_string(i), std::int64_t(i), "c", {{"platform", cycle[i % 3]}}));
        // a flag per request that adds a distinct value: N - 1 while the cycle is fresh
        CHECK(replay(s, rs) == std::min<std::size_t>(n, 3) - 1);
    }
}

TEST_CASE("absent is an ordinary value, missing cookie skips") {
    TemporalState s;
    CHECK(s.observe(req("a", 1, "c", {{"device.memory", "8"}})).empty());
    CHECK(s.observe(req("b", 2, "c", {})).size() == 1);
    CHECK(s.observe(req("c", 3, std::nullopt, {{"device.memory", "2"}})).empty());
    CHECK(s.cookie_count() == 1);
}

TEST_CASE("ip timezone uses disjoint-new offsets") {
    TemporalState s;
    CHECK(s.observe(req("a", 1, std::nullopt, {{"timezone", "Europe/Paris"}}, "1.2.3.4")).empty());
    CHECK(s.observe(req("b", 2, std::nullopt, {{"timezone", "Europe/London"}}, "1.2.3.4")).empty());
    auto flags = s.observe(req("c", 3, std::nullopt, {{"timezone", "America/Los_Angeles"}}, "1.2.3.4"));
    REQUIRE(flags.size() == 1);
    CHECK(flags[0].key_kind == KeyKind::Ip);
    CHECK(flags[0].attribute == "timezone");
    CHECK(flags[0].new_value == "-480;-420");
    CHECK(flags[0].prior_values == std::vector<std::string>{"0;60", "60;120"});
    CHECK(s.observe(req("d", 4, std::nullopt, {{"timezone", "Europe/Paris"}}, "1.2.3.4")).empty());
    CHECK(s.observe(req("e", 5, std::nullopt, {{"timezone", "Asia/Tokyo"}}, "5.6.7.8")).empty());
}

TEST_CASE("ip region watch") {
    TemporalState s;
    CHECK(s.observe(req("a", 1, std::nullopt, {{"geolocation.region", "FR/IDF"}}, "1.1.1.1")).empty());
    CHECK(s.observe(req("b", 2, std::nullopt, {{"geolocation.region", "FR/IDF"}}, "1.1.1.1")).empty());
    auto flags = s.observe(req("c", 3, std::nullopt, {{"geolocation.region", "US/CA"}}, "1.1.1.1"));
    REQUIRE(flags.size() == 1);
    CHECK(flags[0].attribute == "geolocation.region");
}

TEST_CASE("ttl forgets old history") {
    TemporalConfig cfg;
    cfg.ttl_ms = 1000;
    TemporalState s(cfg);
    CHECK(s.observe(req("a", 0, "c", {{"hardware.concurrency", "4"}})).empty());
    CHECK(s.observe(req("b", 2000, "c", {{"hardware.concurrency", "8"}})).empty());
    CHECK(s.observe(req("c", 2500, "c", {{"hardware.concurrency", "4"}})).size() == 1);
}

TEST_CASE("config from directives") {
    auto c = TemporalConfig::from_directives({{KeyKind::Cookie, "device.memory"}, {KeyKind::Ip, "timezone"}});
    CHECK(c.cookie_attrs == std::vector<std::string>{"device.memory"});
    CHECK(c.ip_timezone);
    CHECK_FALSE(c.ip_region);
    CHECK_FALSE(TemporalConfig::from_directives({}).enabled());
    CHECK_THROWS_AS(TemporalConfig::from_directives({{KeyKind::Ip, "platform"}}), DataError);
}

TEST_CASE("flags appear iff the distinct count passes one") {
    Rng rng(21);
    auto rs = random_stream(rng, 3000, 25);
    TemporalState s;
    std::map<std::string, std::set<std::string>> seen;  // cookie|attr -> values
    for (const auto& r : rs) {
        auto flags = s.observe(r);
        std::size_t expected = 0;
        if (r.cookie_id)
            for (const auto& attr : s.config().cookie_attrs) {
                auto& values = seen[*r.cookie_id + "|" + attr];
                bool fresh = values.insert(canonical_serialize(r.get(attr))).second;
                expected += fresh && values.size() > 1;
            }
        std::size_t cookie_flags = std::count_if(flags.begin(), flags.end(),
                                                 [](const TemporalFlag& f) { return f.key_kind == KeyKind::Cookie; });
        REQUIRE(cookie_flags == expected);
    }
}

TEST_CASE("replaying a stream twice flags only the first time") {
    Rng rng(22);
    auto rs = random_stream(rng, 2000, 15);
    TemporalState s;
    CHECK(replay(s, rs) > 0);
    CHECK(replay(s, rs) == 0);
}

TEST_CASE("permuting records with disjoint keys keeps the flag multiset") {
    Rng rng(23);
    // each record below gets its own cookie-and-IP universe per block
    std::vector<std::vector<FingerprintRecord>> blocks;
    for (int b = 0; b < 20; ++b) {
        auto block = random_stream(rng, 30, 1);
        for (auto& r : block) {
            if (r.cookie_id) r.cookie_id = "k" + std::to_string(b);
            r.ip = "10.8." + std::to_string(b) + ".1";
            r.record_id = std::to_string(b) + ":" + r.record_id;
        }
        blocks.push_back(std::move(block));
    }
    auto interleave = [&](std::uint64_t seed) {
        Rng pick(seed);
        std::vector<std::size_t> pos(blocks.size(), 0);
        std::vector<FingerprintRecord> out;
        while (out.size() < blocks.size() * 30) {
            auto b = pick.below(blocks.size());
            if (pos[b] < blocks[b].size()) out.push_back(blocks[b][pos[b]++]);
        }
        return out;
    };
    TemporalState s1, s2;
    auto f1 = flag_keys(s1, interleave(1));
    auto f2 = flag_keys(s2, interleave(2));
    CHECK(f1 == f2);
    CHECK_FALSE(f1.empty());
}

TEST_CASE("snapshot round-trip") {
    TemporalState empty;
    CHECK(TemporalState::restore(empty.snapshot()) == empty);
    CHECK(TemporalState::restore(empty.snapshot()).empty());

    Rng rng(24);
    auto rs = random_stream(rng, 1200, 40);
    std::vector<FingerprintRecord> head(rs.begin(), rs.begin() + 1000), tail(rs.begin() + 1000, rs.end());
    TemporalConfig cfg;
    cfg.ttl_ms = 5000;
    TemporalState live(cfg);
    replay(live, head);
    auto bytes = live.snapshot();
    auto restored = TemporalState::restore(bytes);
    CHECK(restored == live);
    CHECK(restored.snapshot() == bytes);
    CHECK(restored.config() == cfg);
    CHECK(flag_keys(restored, tail) == flag_keys(live, tail));
}

TEST_CASE("corrupt snapshots are rejected") {
    Rng rng(25);
    TemporalState s;
    replay(s, random_stream(rng, 200, 10));
    auto bytes = s.snapshot();
    for (std::size_t cut : {std::size_t(0), std::size_t(1), bytes.size() / 3, bytes.size() / 2, bytes.size() - 2})
        CHECK_THROWS_AS(TemporalState::restore(std::string_view(bytes).substr(0, cut)), DataError);
    CHECK_THROWS_AS(TemporalState::restore(R"({"format":"something-else","version":1})"), DataError);
    CHECK_THROWS_AS(TemporalState::restore("[1,2,3]"), DataError);
}

TEST_CASE("brave-like fixture matches a replay oracle") {
    Rng rng(26);
    std::vector<FingerprintRecord> rs;
    std::size_t expected = 0;
    for (int dev = 0; dev < 50; ++dev) {
        const auto k = 2 + rng.below(4);
        const auto requests = 1 + rng.below(12);
        std::set<std::string> conc, mem;
        for (std::uint64_t j = 0; j < requests; ++j) {
            auto c = std::to_string(2 * (1 + rng.below(k)));
            auto m = std::to_string(1 << rng.below(k));
            if (!conc.empty() && !conc.count(c)) ++expected;
            if (!mem.empty() && !mem.count(m)) ++expected;
            conc.insert(c);
            mem.insert(m);
            rs.push_back(req("d" + std::to_string(dev) + "-" + std::to_string(j), std::int64_t(j),
                             "brave" + std::to_string(dev), {{"hardware.concurrency", c}, {"device.memory", m}}));
        }
    }
    TemporalState s;
    CHECK(replay(s, rs) == expected);
}
