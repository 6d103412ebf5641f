#include <algorithm>
#include <chrono>
#include <cmath>

#include "fpscan/engine.hpp"
#include "fpscan/error.hpp"
#include "fpscan/record_io.hpp"

namespace fpscan {

namespace {

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Pulls record_id and timestamp out of a record without building a DOM.
struct KeyScanner : nlohmann::json_sax<nlohmann::json> {
    int depth = 0;
    enum class Want { None, Id, Timestamp } want = Want::None;
    std::optional<std::string> id;
    std::optional<std::int64_t> timestamp;

    bool scalar() {
        want = Want::None;
        return true;
    }
    bool null() override { return scalar(); }
    bool boolean(bool) override { return scalar(); }
    bool number_integer(number_integer_t v) override {
        if (want == Want::Timestamp) timestamp = v;
        return scalar();
    }
    bool number_unsigned(number_unsigned_t v) override {
        if (want == Want::Timestamp && v <= static_cast<number_unsigned_t>(INT64_MAX)) timestamp = std::int64_t(v);
        return scalar();
    }
    bool number_float(number_float_t v, const string_t&) override {
        if (want == Want::Timestamp && std::isfinite(v) && std::floor(v) == v && std::fabs(v) < 9.0e15)
            timestamp = static_cast<std::int64_t>(v);
        return scalar();
    }
    bool string(string_t& v) override {
        if (want == Want::Id) id = std::move(v);
        return scalar();
    }
    bool binary(binary_t&) override { return scalar(); }
    bool start_object(std::size_t) override {
        want = Want::None;
        ++depth;
        return true;
    }
    bool end_object() override {
        --depth;
        return true;
    }
    bool start_array(std::size_t) override {
        want = Want::None;
        ++depth;
        return true;
    }
    bool end_array() override {
        --depth;
        return true;
    }
    bool key(string_t& k) override {
        want = depth != 1 ? Want::None : k == "record_id" ? Want::Id : k == "timestamp" ? Want::Timestamp : Want::None;
        return true;
    }
    bool parse_error(std::size_t, const std::string&, const nlohmann::detail::exception&) override { return false; }
};

// Byte scan for the two top-level fields; tracks only strings and nesting.
// Returns false whenever the line needs a real parser (escapes in the id
// or a key, non-integer timestamps, anything unexpected).
bool quick_keys(std::string_view line, std::optional<std::string>& id, std::optional<std::int64_t>& timestamp) {
    int depth = 0;
    std::size_t i = 0;
    const std::size_t n = line.size();
    auto skip_ws = [&] {
        while (i < n && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r' || line[i] == '\n')) ++i;
    };
    // On entry line[i] == '"'; leaves i after the closing quote.
    auto read_string = [&](bool& escaped) -> std::string_view {
        const std::size_t start = ++i;
        escaped = false;
        while (i < n && line[i] != '"') {
            if (line[i] == '\\') {
                escaped = true;
                ++i;
            }
            ++i;
        }
        if (i >= n) return {};
        return line.substr(start, i++ - start);
    };
    while (i < n) {
        const char c = line[i];
        if (c == '{' || c == '[') {
            ++depth;
            ++i;
        } else if (c == '}' || c == ']') {
            --depth;
            ++i;
        } else if (c == '"') {
            bool escaped;
            const auto text = read_string(escaped);
            if (i > n) return false;
            const std::size_t after = i;
            skip_ws();
            const bool is_key = i < n && line[i] == ':';
            if (!is_key || depth != 1) {
                i = after;
                continue;
            }
            if (escaped) return false;
            ++i;
            skip_ws();
            if (text == "record_id") {
                if (line.compare(i, 4, "null") == 0) {
                    id.reset();
                    i += 4;
                } else if (i < n && line[i] == '"') {
                    const auto value = read_string(escaped);
                    if (escaped || i > n) return false;
                    id = std::string(value);
                } else {
                    return false;
                }
            } else if (text == "timestamp") {
                const std::size_t start = i;
                if (i < n && line[i] == '-') ++i;
                while (i < n && line[i] >= '0' && line[i] <= '9') ++i;
                const auto digits = line.substr(start, i - start);
                if (digits.empty() || digits == "-" || digits.size() > 18) return false;
                if (i < n && line[i] != ',' && line[i] != '}' && line[i] != ' ') return false;
                timestamp = std::stoll(std::string(digits));
            }
        } else {
            ++i;
        }
    }
    return depth == 0;
}

struct Entry {
    std::int64_t timestamp;
    std::string id;
    std::size_t offset;
    std::size_t length;
    std::size_t line;
};

}  // namespace

DetectStats detect_jsonl(const RuleEngine& engine, TemporalState& state, std::string_view jsonl,
                         const std::function<void(const DetectionDecision&)>& sink, const std::string& source,
                         const AttributeRegistry& registry) {
    DetectStats stats;
    auto t0 = Clock::now();
    std::vector<Entry> index;
    std::size_t pos = 0, line_no = 0;
    while (pos < jsonl.size()) {
        std::size_t end = jsonl.find('\n', pos);
        if (end == std::string_view::npos) end = jsonl.size();
        ++line_no;
        std::string_view line = jsonl.substr(pos, end - pos);
        if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
            KeyScanner scan;
            if (!quick_keys(line, scan.id, scan.timestamp)) {
                scan = KeyScanner{};
                if (!nlohmann::json::sax_parse(line, &scan)) throw ParseError(source, line_no, 1, "malformed JSON record");
            }
            if (!scan.timestamp)
                throw DataError(source + ":" + std::to_string(line_no) + ": field \"timestamp\" must be an integer (UTC ms)");
            index.push_back({*scan.timestamp, scan.id.value_or(source + ":" + std::to_string(line_no)), pos,
                             line.size(), line_no});
        }
        pos = end + 1;
    }
    std::sort(index.begin(), index.end(), [](const Entry& a, const Entry& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        return a.id < b.id;
    });
    stats.index_seconds = since(t0);

    auto config = TemporalConfig::from_directives(engine.temporal());
    config.ttl_ms = state.config().ttl_ms;
    state.set_config(std::move(config));

    for (const auto& e : index) {
        t0 = Clock::now();
        const FingerprintRecord record = record_from_line(jsonl.substr(e.offset, e.length), registry, source, e.line);
        stats.parse_seconds += since(t0);
        t0 = Clock::now();
        const auto decision = evaluate_record(engine, state, record);
        stats.evaluate_seconds += since(t0);
        sink(decision);
        ++stats.records;
    }
    return stats;
}

}  // namespace fpscan
