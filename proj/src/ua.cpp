#include "fpscan/ua.hpp"

#include <regex>
#include <vector>

namespace fpscan {

namespace {

struct Pattern {
    std::regex re;
    std::string family;
};

Pattern make(const char* re, const char* family) {
    return {std::regex(re, std::regex::ECMAScript | std::regex::optimize), family};
}

const std::vector<Pattern>& os_patterns() {
    static const std::vector<Pattern> table = {
        make(R"(CrOS)", "Chrome OS"),
        make(R"(\b(?:iPhone|iPad|iPod)\b)", "iOS"),
        make(R"(Android)", "Android"),
        make(R"(Macintosh|Mac OS X)", "Mac OS X"),
        make(R"(Windows)", "Windows"),
        make(R"(Ubuntu)", "Ubuntu"),
        make(R"(Linux|X11)", "Linux"),
    };
    return table;
}

const std::vector<Pattern>& browser_patterns() {
    static const std::vector<Pattern> table = {
        make(R"(HeadlessChrome/)", "HeadlessChrome"),
        make(R"(EdgA/)", "Edge Mobile"),
        make(R"(Edg/)", "Edge"),
        make(R"(OPR/)", "Opera"),
        make(R"(SamsungBrowser/)", "Samsung Internet"),
        make(R"(MiuiBrowser/)", "MiuiBrowser"),
        make(R"(CriOS/)", "Chrome Mobile iOS"),
        make(R"(FxiOS/)", "Firefox iOS"),
        make(R"(Firefox/)", ""),  // desktop or mobile, resolved below
        make(R"(Chrome/[\d.]+ Mobile)", "Chrome Mobile"),
        make(R"(Chrome/)", "Chrome"),
        make(R"(\b(?:iPhone|iPad|iPod)\b.*Safari/|Mobile/\w+ Safari/)", "Mobile Safari"),
        make(R"(Version/[\d.]+.*Safari/)", "Safari"),
        make(R"(^curl/)", "curl"),
        make(R"(^Wget/)", "Wget"),
        make(R"(^python-requests/)", "Python Requests"),
    };
    return table;
}

const std::regex& android_model() {
    static const std::regex re(R"(Android [\d.]+; ([^;)]+?)(?: Build/[^;)]*)?[;)])",
                               std::regex::ECMAScript | std::regex::optimize);
    return re;
}

const std::regex& locale_token() {
    static const std::regex re(R"(^[a-zA-Z]{2}[-_][a-zA-Z]{2,4}$)", std::regex::ECMAScript | std::regex::optimize);
    return re;
}

bool contains(std::string_view haystack, std::string_view needle) {
    return haystack.find(needle) != std::string_view::npos;
}

std::string match_family(const std::vector<Pattern>& table, const std::string& ua) {
    for (const auto& p : table)
        if (std::regex_search(ua, p.re)) return p.family;
    return "Unknown";
}

std::string parse_browser(const std::string& ua) {
    for (const auto& p : browser_patterns()) {
        if (!std::regex_search(ua, p.re)) continue;
        if (p.family.empty())  // Firefox: desktop or mobile
            return contains(ua, "Android") || contains(ua, "Mobile") ? "Firefox Mobile" : "Firefox";
        return p.family;
    }
    return "Unknown";
}

std::string parse_device(const std::string& ua) {
    if (contains(ua, "iPhone")) return "iPhone";
    if (contains(ua, "iPad")) return "iPad";
    if (contains(ua, "iPod")) return "iPod";
    if (contains(ua, "Macintosh")) return "Mac";
    if (!contains(ua, "Android")) return "Unknown";

    std::smatch m;
    if (contains(ua, "; U;") || !std::regex_search(ua, m, android_model())) return "Generic Smartphone";
    std::string model = m[1].str();
    if (model == "Mobile" || model == "Tablet" || std::regex_match(model, locale_token()))
        return "Generic Smartphone";
    if (model.rfind("SM-", 0) == 0) return "Samsung " + model;
    return model;
}

}  // namespace

UaFields parse_user_agent(std::string_view raw) {
    UaFields out;
    out.raw = std::string(raw);
    if (raw.empty()) {
        out.device = out.browser = out.os = "Unknown";
        return out;
    }
    out.device = parse_device(out.raw);
    out.browser = parse_browser(out.raw);
    out.os = match_family(os_patterns(), out.raw);
    return out;
}

std::string device_brand(std::string_view device) {
    auto starts = [&](std::string_view p) { return device.substr(0, p.size()) == p; };
    if (device == "iPhone" || device == "iPad" || device == "iPod" || device == "Mac") return "Apple";
    if (starts("Samsung ") || starts("SAM ")) return "Samsung";
    if (starts("Pixel")) return "Google";
    if (starts("XiaoMi") || starts("Xiaomi") || starts("Redmi") || starts("MiPad") || starts("Mi ") ||
        (device.size() >= 5 && starts("M20")))
        return "Xiaomi";
    if (starts("Infinix")) return "Infinix";
    return "Unknown";
}

}  // namespace fpscan
