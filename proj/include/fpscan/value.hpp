#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace fpscan {

/// Screen size in pixels, width first, as reported by the browser.
struct Resolution {
    std::uint32_t width = 0;
    std::uint32_t height = 0;

    friend auto operator<=>(const Resolution&, const Resolution&) = default;
};

/// Marker for an attribute that was not observed.
struct Absent {
    friend bool operator==(Absent, Absent) { return true; }
};

enum class ValueKind { Absent, Text, Integer, Real, Flag, TextList, Resolution };

std::string_view to_string(ValueKind kind);
std::optional<ValueKind> parse_value_kind(std::string_view name);

/// A single fingerprint attribute value.
///
/// Reals are always finite and compare by bit pattern, so `-0.0` and `0.0`
/// are distinct values (they also serialize differently). Two Absent values
/// compare equal.
class AttributeValue {
public:
    using TextList = std::vector<std::string>;

    AttributeValue() = default;

    static AttributeValue absent() { return {}; }
    static AttributeValue text(std::string value);
    static AttributeValue integer(std::int64_t value);
    /// Throws fpscan::Error for NaN or infinities.
    static AttributeValue real(double value);
    static AttributeValue flag(bool value);
    static AttributeValue text_list(TextList values);
    /// Throws fpscan::Error when either dimension is zero.
    static AttributeValue resolution(std::uint32_t width, std::uint32_t height);

    ValueKind kind() const noexcept;
    bool is_absent() const noexcept { return kind() == ValueKind::Absent; }

    const std::string* as_text() const noexcept { return std::get_if<std::string>(&storage_); }
    const std::int64_t* as_integer() const noexcept { return std::get_if<std::int64_t>(&storage_); }
    const double* as_real() const noexcept { return std::get_if<double>(&storage_); }
    const bool* as_flag() const noexcept { return std::get_if<bool>(&storage_); }
    const TextList* as_text_list() const noexcept { return std::get_if<TextList>(&storage_); }
    const Resolution* as_resolution() const noexcept { return std::get_if<Resolution>(&storage_); }

    /// Integer or Real widened to double.
    std::optional<double> as_number() const noexcept;

    friend bool operator==(const AttributeValue& a, const AttributeValue& b) noexcept;

private:
    using Storage = std::variant<Absent, std::string, std::int64_t, double, bool, TextList, Resolution>;
    explicit AttributeValue(Storage s) : storage_(std::move(s)) {}

    Storage storage_;
};

/// Absent sentinel used by canonical_serialize.
inline constexpr std::string_view kAbsentSentinel = "\xE2\x8A\xA5";  // U+22A5

/// Stable, injective string form of a value.
///
///   Absent      ⊥
///   Flag        true | false
///   Integer     decimal, e.g. -12
///   Real        shortest round-trip decimal that always carries '.', 'e'
///               (e.g. 8.0, 0.5, 1e+20)
///   Resolution  <w>x<h>
///   TextList    [a,b]; elements escape '\', ',', '[' and ']' with '\';
///               an empty element is written as \e, so [] is the empty list
///   Text        verbatim, unless the verbatim form would read back as
///               another kind or starts with '"'; then it is double-quoted
///               with '\' escaping '"' and '\'.
std::string canonical_serialize(const AttributeValue& value);

/// Inverse of canonical_serialize. Never fails for strings produced by
/// canonical_serialize; malformed quoted or list forms throw ParseError.
AttributeValue parse_canonical(std::string_view text);

}  // namespace fpscan
