#include "fpscan/value.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <system_error>

#include "fpscan/error.hpp"

namespace fpscan {

namespace {

constexpr std::string_view kKindNames[] = {"absent", "text",     "integer",   "real",
                                           "flag",   "text_list", "resolution"};

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::optional<std::int64_t> read_integer(std::string_view s) {
    if (s.empty()) return std::nullopt;
    // from_chars accepts a leading '-' but not '+'; reject "-" alone and
    // anything with trailing bytes.
    std::int64_t out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return out;
}

bool looks_real(std::string_view s) {
    return s.find_first_of(".eE") != std::string_view::npos;
}

std::optional<double> read_real(std::string_view s) {
    if (s.empty() || !looks_real(s)) return std::nullopt;
    double out = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(out)) return std::nullopt;
    return out;
}

std::optional<std::uint32_t> read_dimension(std::string_view s) {
    if (s.empty() || s.size() > 9) return std::nullopt;
    for (char c : s)
        if (!is_digit(c)) return std::nullopt;
    std::uint32_t out = 0;
    std::from_chars(s.data(), s.data() + s.size(), out);
    if (out == 0) return std::nullopt;
    return out;
}

std::optional<Resolution> read_resolution(std::string_view s) {
    auto x = s.find('x');
    if (x == std::string_view::npos) return std::nullopt;
    auto w = read_dimension(s.substr(0, x));
    auto h = read_dimension(s.substr(x + 1));
    if (!w || !h) return std::nullopt;
    return Resolution{*w, *h};
}

std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    std::string out(buf, ptr);
    if (!looks_real(out)) out += ".0";
    return out;
}

std::string escape_list_element(const std::string& s) {
    if (s.empty()) return "\\e";
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        if (c == '\\' || c == ',' || c == '[' || c == ']') out += '\\';
        out += c;
    }
    return out;
}

std::optional<AttributeValue::TextList> read_list(std::string_view s, bool strict) {
    if (s.size() < 2 || s.front() != '[' || s.back() != ']') return std::nullopt;
    AttributeValue::TextList out;
    std::string_view body = s.substr(1, s.size() - 2);
    if (body.empty()) return out;
    std::string current;
    bool empty_marker = false;
    auto fail = [&](std::string msg) -> std::optional<AttributeValue::TextList> {
        if (strict) throw ParseError("", 1, 1, std::move(msg));
        return std::nullopt;
    };
    for (std::size_t i = 0; i < body.size(); ++i) {
        char c = body[i];
        if (c == '\\') {
            if (i + 1 >= body.size()) return fail("dangling escape in list");
            char n = body[++i];
            if (n == 'e') {
                if (!current.empty() || empty_marker) return fail("misplaced empty-element marker");
                empty_marker = true;
            } else if (n == '\\' || n == ',' || n == '[' || n == ']') {
                if (empty_marker) return fail("misplaced empty-element marker");
                current += n;
            } else {
                return fail("unknown escape in list");
            }
        } else if (c == ',') {
            if (current.empty() && !empty_marker) return fail("empty list element without marker");
            out.push_back(std::move(current));
            current.clear();
            empty_marker = false;
        } else if (c == '[' || c == ']') {
            return fail("unescaped bracket in list");
        } else {
            if (empty_marker) return fail("misplaced empty-element marker");
            current += c;
        }
    }
    if (current.empty() && !empty_marker) return fail("empty list element without marker");
    out.push_back(std::move(current));
    return out;
}

// Parses every non-Text form. Returns nullopt when `s` is plain text.
std::optional<AttributeValue> read_non_text(std::string_view s, bool strict) {
    if (s == kAbsentSentinel) return AttributeValue::absent();
    if (s == "true") return AttributeValue::flag(true);
    if (s == "false") return AttributeValue::flag(false);
    if (auto i = read_integer(s)) return AttributeValue::integer(*i);
    if (auto r = read_real(s)) return AttributeValue::real(*r);
    if (auto res = read_resolution(s)) return AttributeValue::resolution(res->width, res->height);
    if (auto list = read_list(s, strict)) return AttributeValue::text_list(std::move(*list));
    return std::nullopt;
}

}  // namespace

std::string_view to_string(ValueKind kind) { return kKindNames[static_cast<int>(kind)]; }

std::optional<ValueKind> parse_value_kind(std::string_view name) {
    for (int i = 0; i < 7; ++i)
        if (kKindNames[i] == name) return static_cast<ValueKind>(i);
    return std::nullopt;
}

AttributeValue AttributeValue::text(std::string value) { return AttributeValue(Storage(std::move(value))); }
AttributeValue AttributeValue::integer(std::int64_t value) { return AttributeValue(Storage(value)); }

AttributeValue AttributeValue::real(double value) {
    if (!std::isfinite(value)) throw Error("real attribute values must be finite");
    return AttributeValue(Storage(value));
}

AttributeValue AttributeValue::flag(bool value) { return AttributeValue(Storage(value)); }
AttributeValue AttributeValue::text_list(TextList values) { return AttributeValue(Storage(std::move(values))); }

AttributeValue AttributeValue::resolution(std::uint32_t width, std::uint32_t height) {
    if (width == 0 || height == 0) throw Error("resolution dimensions must be positive");
    return AttributeValue(Storage(Resolution{width, height}));
}

ValueKind AttributeValue::kind() const noexcept {
    switch (storage_.index()) {
        case 0: return ValueKind::Absent;
        case 1: return ValueKind::Text;
        case 2: return ValueKind::Integer;
        case 3: return ValueKind::Real;
        case 4: return ValueKind::Flag;
        case 5: return ValueKind::TextList;
        default: return ValueKind::Resolution;
    }
}

std::optional<double> AttributeValue::as_number() const noexcept {
    if (auto* i = as_integer()) return static_cast<double>(*i);
    if (auto* r = as_real()) return *r;
    return std::nullopt;
}

bool operator==(const AttributeValue& a, const AttributeValue& b) noexcept {
    if (a.storage_.index() != b.storage_.index()) return false;
    if (auto* x = a.as_real())
        return std::bit_cast<std::uint64_t>(*x) == std::bit_cast<std::uint64_t>(*b.as_real());
    return a.storage_ == b.storage_;
}

std::string canonical_serialize(const AttributeValue& value) {
    switch (value.kind()) {
        case ValueKind::Absent: return std::string(kAbsentSentinel);
        case ValueKind::Flag: return *value.as_flag() ? "true" : "false";
        case ValueKind::Integer: return std::to_string(*value.as_integer());
        case ValueKind::Real: return format_real(*value.as_real());
        case ValueKind::Resolution: {
            auto r = *value.as_resolution();
            return std::to_string(r.width) + "x" + std::to_string(r.height);
        }
        case ValueKind::TextList: {
            std::string out = "[";
            const auto& list = *value.as_text_list();
            for (std::size_t i = 0; i < list.size(); ++i) {
                if (i > 0) out += ',';
                out += escape_list_element(list[i]);
            }
            return out + "]";
        }
        case ValueKind::Text: {
            const auto& s = *value.as_text();
            bool bracketed = s.size() >= 2 && s.front() == '[' && s.back() == ']';
            if (s.empty() || (s.front() != '"' && !bracketed && !read_non_text(s, false))) return s;
            std::string out = "\"";
            for (char c : s) {
                if (c == '"' || c == '\\') out += '\\';
                out += c;
            }
            return out + "\"";
        }
    }
    return {};
}

AttributeValue parse_canonical(std::string_view text) {
    if (!text.empty() && text.front() == '"') {
        if (text.size() < 2 || text.back() != '"') throw ParseError("", 1, 1, "unterminated quoted text");
        std::string out;
        for (std::size_t i = 1; i + 1 < text.size(); ++i) {
            char c = text[i];
            if (c == '\\') {
                if (i + 2 >= text.size()) throw ParseError("", 1, i + 1, "dangling escape in quoted text");
                out += text[++i];
            } else if (c == '"') {
                throw ParseError("", 1, i + 1, "unescaped quote in quoted text");
            } else {
                out += c;
            }
        }
        return AttributeValue::text(std::move(out));
    }
    if (auto v = read_non_text(text, true)) return *v;
    return AttributeValue::text(std::string(text));
}

}  // namespace fpscan
