#pragma once

#include <optional>
#include <string_view>

namespace fpscan {

// Shipped data files compiled into the library (see cmake/EmbedData.cmake).
// Names: registry.json, categories.json, kb.json, zones.csv, geo.csv,
// golden.rules, bench.json.
std::optional<std::string_view> embedded_data(std::string_view name);

}  // namespace fpscan
