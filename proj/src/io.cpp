#include "fpscan/io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "fpscan/embedded.hpp"
#include "fpscan/error.hpp"

namespace fpscan {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw Error("cannot open " + path);
    const auto size = in.tellg();
    if (size > 0) {
        std::string out(static_cast<std::size_t>(size), '\0');
        in.seekg(0);
        if (in.read(out.data(), size)) return out;
        in.clear();
    }
    // Pipes and other unsized files.
    in.seekg(0);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw Error("write failed for " + path);
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex64(std::uint64_t value) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[value & 0xF];
        value >>= 4;
    }
    return out;
}

std::string load_data_text(const std::string& spec, std::string_view default_name) {
    std::string_view name;
    if (spec.empty() || spec == "builtin") {
        name = default_name;
    } else if (spec.rfind("builtin:", 0) == 0) {
        name = std::string_view(spec).substr(8);
    } else {
        return read_file(spec);
    }
    auto data = embedded_data(name);
    if (!data) throw Error("no built-in data file named " + std::string(name));
    return std::string(*data);
}

}  // namespace fpscan
