#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fpscan/geo.hpp"
#include "fpscan/record.hpp"
#include "fpscan/rules.hpp"

namespace fpscan {

/// A request that added a new value to a key's history.
struct TemporalFlag {
    std::string record_id;
    KeyKind key_kind = KeyKind::Cookie;
    std::string attribute;
    std::vector<std::string> prior_values;  // canonical, sorted
    std::string new_value;

    friend bool operator==(const TemporalFlag&, const TemporalFlag&) = default;
};

struct TemporalConfig {
    /// Immutable device attributes tracked per cookie.
    std::vector<std::string> cookie_attrs = {"hardware.concurrency", "device.memory", "platform"};
    /// Per-IP timezone offset sets.
    bool ip_timezone = true;
    /// Per-IP geolocation.region values (only when the record carries one).
    bool ip_region = true;
    /// History older than this is forgotten before a key is checked.
    std::optional<std::int64_t> ttl_ms;

    static TemporalConfig from_directives(const std::vector<TemporalDirective>& directives);
    bool enabled() const { return !cookie_attrs.empty() || ip_timezone || ip_region; }

    friend bool operator==(const TemporalConfig&, const TemporalConfig&) = default;
};

/// Per-key observed-value history. Histories only grow (TTL aside).
///
/// Cookie keys: a watched attribute is flagged when its canonical value is
/// new for the cookie and the cookie already has at least one value for
/// it. Absent is an ordinary value.
///
/// IP keys: the record's timezone offsets are flagged when they share no
/// offset with the union of offsets seen for the IP so far; a DST switch
/// within one zone is therefore never flagged. geolocation.region is
/// flagged on any new region.
///
/// Records must arrive in nondecreasing timestamp order per key.
class TemporalState {
public:
    TemporalState() = default;
    explicit TemporalState(TemporalConfig config) : config_(std::move(config)) {}

    std::vector<TemporalFlag> observe(const FingerprintRecord& record);

    const TemporalConfig& config() const noexcept { return config_; }
    void set_config(TemporalConfig config) { config_ = std::move(config); }

    std::size_t cookie_count() const noexcept { return cookies_.size(); }
    std::size_t ip_count() const noexcept { return ips_.size(); }
    std::int64_t created_at() const noexcept { return created_at_; }
    std::int64_t updated_at() const noexcept { return updated_at_; }
    bool empty() const noexcept { return cookies_.empty() && ips_.empty(); }

    /// Versioned JSON; keys and values sorted so equal states give equal bytes.
    std::string snapshot() const;
    /// Throws DataError for anything snapshot() could not have produced.
    static TemporalState restore(std::string_view bytes);

    friend bool operator==(const TemporalState&, const TemporalState&) = default;

private:
    struct CookieHistory {
        std::map<std::string, std::set<std::string>, std::less<>> values;
        std::int64_t last_seen = 0;
        friend bool operator==(const CookieHistory&, const CookieHistory&) = default;
    };
    struct IpHistory {
        OffsetSet offsets;                  // union of everything seen
        std::set<std::string> offset_sets;  // distinct per-request sets, "a;b"
        std::set<std::string> regions;
        std::int64_t last_seen = 0;
        friend bool operator==(const IpHistory&, const IpHistory&) = default;
    };

    TemporalConfig config_;
    std::unordered_map<std::string, CookieHistory> cookies_;
    std::unordered_map<std::string, IpHistory> ips_;
    std::int64_t created_at_ = 0;
    std::int64_t updated_at_ = 0;
    bool started_ = false;
};

/// Free-function form of TemporalState::observe.
std::vector<TemporalFlag> observe(TemporalState& state, const FingerprintRecord& record);

}  // namespace fpscan
