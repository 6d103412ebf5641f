#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fpscan {

/// Reads a whole file; throws fpscan::Error when it cannot be opened.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// 64-bit FNV-1a, hex encoded. Used for digests of artifacts.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t value);

/// Resolves a data argument: "builtin:<name>" (or empty, meaning the given
/// default name) selects an embedded data file, anything else is a path.
std::string load_data_text(const std::string& spec, std::string_view default_name);

}  // namespace fpscan
