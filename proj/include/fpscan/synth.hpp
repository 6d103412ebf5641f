#pragma once

#include <cstdint>
#include <map>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "fpscan/geo.hpp"
#include "fpscan/kb.hpp"
#include "fpscan/record.hpp"

namespace fpscan {

/// Seeded generator with portable draws (no std distributions, whose
/// output differs between standard libraries).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, n); n > 0.
    std::uint64_t below(std::uint64_t n);
    /// Uniform in [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi);
    double unit();  // [0, 1)
    bool chance(double p) { return unit() < p; }

    template <class T>
    const T& pick(const std::vector<T>& v) {
        return v[static_cast<std::size_t>(below(v.size()))];
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[static_cast<std::size_t>(below(i))]);
    }

private:
    std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

struct BotAlteration {
    /// Attributes a bot may resample. "ua.device" (or "user_agent") swaps
    /// the User-Agent for another profile's.
    std::vector<std::string> attrs_altered = {"ua.device", "screen.resolution", "touch_support", "max_touch_points",
                                              "hardware.concurrency", "device.memory", "platform"};
    /// Independent per-attribute draws; otherwise one draw decides for all.
    bool independent = true;
    /// Probability that each listed attribute is altered for an identity.
    double alter_prob = 0.2;
    double geo_mismatch_prob = 0.1;
    double cookie_retention_prob = 0.3;
};

struct ServiceModel {
    double evasion_prob_given_altered = 0.45;
    double evasion_prob_given_unaltered = 0.45;
    /// Probability the service labels a human request as bot.
    double human_bot_prob = 0.03;
};

struct SynthConfig {
    std::uint64_t seed = 1;
    std::uint64_t n_humans = 100;
    std::uint64_t n_bots = 100;
    std::int64_t requests_min = 1;
    std::int64_t requests_max = 5;
    std::int64_t start_ms = 1672531200000;  // 2023-01-01T00:00:00Z
    std::int64_t span_ms = 30LL * 24 * 3600 * 1000;
    BotAlteration bot_alteration;
    std::map<std::string, ServiceModel> services = {{"datadome", {}}, {"botd", {}}};
    std::vector<std::string> bot_services = {"S1", "S2", "S3"};
    /// Fraction of human identities whose User-Agent claims another device.
    double human_ua_spoof_prob = 0.0;
    /// Devices a spoofing human may claim; a target must reject the human's
    /// screen resolution.
    std::vector<std::string> human_spoof_devices = {"iPhone", "iPad", "Mac"};

    /// Throws DataError when a probability leaves [0, 1] or a count is
    /// inconsistent.
    void validate() const;
};

SynthConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::ordered_json synth_config_to_json(const SynthConfig& c);

/// Deterministic corpus generator. Records are raw log records (no derived
/// ua.* or offset attributes); run them through the Normalizer.
class Synthesizer {
public:
    Synthesizer(SynthConfig config, const KnowledgeBase& kb = KnowledgeBase::builtin(),
                const GeoTable& geo = GeoTable::builtin(),
                const AttributeRegistry& registry = AttributeRegistry::builtin());

    /// Requests of human identity `index`: one cookie, one IP, constant
    /// catalog-consistent attributes, timezone matching the IP's region.
    std::vector<FingerprintRecord> gen_human(std::uint64_t index) const;
    /// Requests of bot identity `index`, starting from a catalog profile and
    /// then resampling attributes per the alteration model.
    std::vector<FingerprintRecord> gen_bot(std::uint64_t index) const;
    /// Whether bot `index` altered anything (decides its evasion odds).
    bool bot_altered(std::uint64_t index) const;
    /// Whether human `index` sends a User-Agent of another device.
    bool human_spoofed(std::uint64_t index) const;

    /// Every identity, shuffled by a seed-derived permutation.
    std::vector<FingerprintRecord> gen_records() const;
    /// Writes gen_records() as ingestion JSONL; returns the record count.
    /// Lines are produced identity by identity, so memory holds serialized
    /// lines rather than records.
    std::size_t gen_corpus(std::ostream& out) const;

    const SynthConfig& config() const noexcept { return config_; }

private:
    struct Identity;
    struct Region {
        std::string name;
        std::vector<std::string> zones;  // zones overlapping the region's offsets
        std::vector<std::string> languages;
        std::vector<std::pair<std::uint32_t, int>> human_prefixes;  // IPv4 base, prefix length
        std::vector<std::pair<std::uint32_t, int>> bot_prefixes;
        OffsetSet offsets;
    };
    struct Profile {
        const SynthProfile* source;
        AttributeMap fixed;                                      // profile attributes
        std::vector<std::pair<std::string, std::vector<AttributeValue>>> hardware;  // catalog draws
    };

    Identity make_identity(std::uint64_t index, bool human) const;
    std::vector<FingerprintRecord> emit(Identity& id) const;
    AttributeValue typed(const std::string& attr, const AttributeValue& kb_value) const;

    SynthConfig config_;
    const KnowledgeBase& kb_;
    const AttributeRegistry& registry_;
    std::vector<Profile> profiles_;
    std::vector<Region> regions_;
    std::vector<std::pair<std::string, OffsetSet>> all_zones_;
    std::map<std::string, std::vector<AttributeValue>, std::less<>> pools_;
};

}  // namespace fpscan
