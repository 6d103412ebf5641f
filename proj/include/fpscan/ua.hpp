#pragma once

#include <string>
#include <string_view>

namespace fpscan {

/// Device, browser and OS families derived from a User-Agent string. Each
/// field is "Unknown" (never empty) when the UA does not identify it.
struct UaFields {
    std::string device;
    std::string browser;
    std::string os;
    std::string raw;

    friend bool operator==(const UaFields&, const UaFields&) = default;
};

/// Ordered pattern-table parser. Family names follow uap-core conventions
/// ("Mobile Safari", "Chrome Mobile iOS", "Samsung SM-A515F", "Mac OS X").
/// It reports what the UA claims; contradictory claims such as Safari on
/// Linux are returned as-is.
UaFields parse_user_agent(std::string_view raw);

/// Brand behind a device family ("Apple", "Samsung", "Google", "Xiaomi",
/// ...), or "Unknown".
std::string device_brand(std::string_view device);

}  // namespace fpscan
