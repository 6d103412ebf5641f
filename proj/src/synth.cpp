#include "fpscan/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "fpscan/error.hpp"
#include "fpscan/record_io.hpp"

namespace fpscan {

using nlohmann::json;

std::uint64_t Rng::below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased and portable.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do x = engine_();
    while (x >= limit);
    return x % n;
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
}

double Rng::unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

namespace {

void check_prob(double p, const std::string& what) {
    if (!(p >= 0.0 && p <= 1.0)) throw DataError("synth config: " + what + " must lie in [0, 1]");
}

std::uint64_t identity_seed(std::uint64_t seed, bool human, std::uint64_t index) {
    return splitmix64(splitmix64(seed) ^ splitmix64((index << 1) | (human ? 0 : 1)));
}

std::string ipv4_text(std::uint32_t ip) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", ip >> 24, (ip >> 16) & 255, (ip >> 8) & 255, ip & 255);
    return buf;
}

std::optional<std::pair<std::uint32_t, int>> ipv4_prefix(const std::string& text) {
    const auto slash = text.find('/');
    const auto ip = parse_ip(text.substr(0, slash));
    if (!ip || !ip->v4) return std::nullopt;
    int len = 32;
    if (slash != std::string::npos) len = std::stoi(text.substr(slash + 1));
    std::uint32_t base = (std::uint32_t{ip->bytes[12]} << 24) | (std::uint32_t{ip->bytes[13]} << 16) |
                         (std::uint32_t{ip->bytes[14]} << 8) | ip->bytes[15];
    return std::make_pair(base, len);
}

std::string hex_token(Rng& rng) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng.next()));
    return buf;
}

template <class T>
T field_or(const json& j, const char* key, T fallback) {
    return j.contains(key) ? j.at(key).get<T>() : fallback;
}

}  // namespace

void SynthConfig::validate() const {
    if (requests_min < 1 || requests_max < requests_min)
        throw DataError("synth config: requests_per_identity needs 1 <= min <= max");
    if (span_ms < 0) throw DataError("synth config: span_ms must be non-negative");
    check_prob(bot_alteration.alter_prob, "alter_prob");
    check_prob(bot_alteration.geo_mismatch_prob, "geo_mismatch_prob");
    check_prob(bot_alteration.cookie_retention_prob, "cookie_retention_prob");
    check_prob(human_ua_spoof_prob, "human_ua_spoof_prob");
    for (const auto& [name, m] : services) {
        check_prob(m.evasion_prob_given_altered, "evasion_prob_given_altered." + name);
        check_prob(m.evasion_prob_given_unaltered, "evasion_prob_given_unaltered." + name);
        check_prob(m.human_bot_prob, "human_bot_prob." + name);
    }
    if (n_bots > 0 && bot_services.empty()) throw DataError("synth config: bot_services is empty");
}

SynthConfig synth_config_from_json(const json& j) {
    if (!j.is_object()) throw DataError("synth config: expected a JSON object");
    SynthConfig c;
    try {
        c.seed = field_or<std::uint64_t>(j, "seed", c.seed);
        c.n_humans = field_or<std::uint64_t>(j, "n_humans", c.n_humans);
        c.n_bots = field_or<std::uint64_t>(j, "n_bots", c.n_bots);
        if (j.contains("requests_per_identity")) {
            const auto& r = j.at("requests_per_identity");
            if (r.is_number_integer()) {
                c.requests_min = c.requests_max = r.get<std::int64_t>();
            } else {
                c.requests_min = field_or<std::int64_t>(r, "min", c.requests_min);
                c.requests_max = field_or<std::int64_t>(r, "max", c.requests_max);
            }
        }
        c.start_ms = field_or<std::int64_t>(j, "start_ms", c.start_ms);
        c.span_ms = field_or<std::int64_t>(j, "span_ms", c.span_ms);
        if (j.contains("bot_alteration")) {
            const auto& b = j.at("bot_alteration");
            auto& a = c.bot_alteration;
            a.attrs_altered = field_or(b, "attrs_altered", a.attrs_altered);
            a.independent = field_or(b, "independent", a.independent);
            a.alter_prob = field_or(b, "alter_prob", a.alter_prob);
            a.geo_mismatch_prob = field_or(b, "geo_mismatch_prob", a.geo_mismatch_prob);
            a.cookie_retention_prob = field_or(b, "cookie_retention_prob", a.cookie_retention_prob);
        }
        if (j.contains("baseline_verdict_model")) {
            const auto& m = j.at("baseline_verdict_model");
            c.services.clear();
            for (const char* key : {"evasion_prob_given_altered", "evasion_prob_given_unaltered", "human_bot_prob"}) {
                if (!m.contains(key)) continue;
                for (const auto& [service, p] : m.at(key).items()) {
                    auto& s = c.services[service];
                    const double v = p.get<double>();
                    if (key[0] == 'h') s.human_bot_prob = v;
                    else if (std::string_view(key).ends_with("unaltered")) s.evasion_prob_given_unaltered = v;
                    else s.evasion_prob_given_altered = v;
                }
            }
        }
        c.bot_services = field_or(j, "bot_services", c.bot_services);
        c.human_ua_spoof_prob = field_or(j, "human_ua_spoof_prob", c.human_ua_spoof_prob);
        c.human_spoof_devices = field_or(j, "human_spoof_devices", c.human_spoof_devices);
    } catch (const json::exception& e) {
        throw DataError(std::string("synth config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::ordered_json synth_config_to_json(const SynthConfig& c) {
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["n_humans"] = c.n_humans;
    j["n_bots"] = c.n_bots;
    j["requests_per_identity"] = {{"min", c.requests_min}, {"max", c.requests_max}};
    j["start_ms"] = c.start_ms;
    j["span_ms"] = c.span_ms;
    const auto& a = c.bot_alteration;
    j["bot_alteration"] = {{"attrs_altered", a.attrs_altered},
                           {"independent", a.independent},
                           {"alter_prob", a.alter_prob},
                           {"geo_mismatch_prob", a.geo_mismatch_prob},
                           {"cookie_retention_prob", a.cookie_retention_prob}};
    nlohmann::ordered_json alt = json::object(), unalt = json::object(), human = json::object();
    for (const auto& [name, m] : c.services) {
        alt[name] = m.evasion_prob_given_altered;
        unalt[name] = m.evasion_prob_given_unaltered;
        human[name] = m.human_bot_prob;
    }
    j["baseline_verdict_model"] = {
        {"evasion_prob_given_altered", alt}, {"evasion_prob_given_unaltered", unalt}, {"human_bot_prob", human}};
    j["bot_services"] = c.bot_services;
    j["human_ua_spoof_prob"] = c.human_ua_spoof_prob;
    j["human_spoof_devices"] = c.human_spoof_devices;
    return j;
}

struct Synthesizer::Identity {
    std::uint64_t index = 0;
    bool human = true;
    Rng rng{0};
    std::size_t profile = 0;
    std::string user_agent;
    AttributeMap attributes;
    std::size_t region = 0;
    std::string ip;
    std::string cookie;
    std::string tag;
    std::vector<std::string> altered;
    bool ua_altered = false;
    bool geo_mismatch = false;
    bool retain_cookie = false;
    bool spoofed = false;
};

AttributeValue Synthesizer::typed(const std::string& attr, const AttributeValue& kb_value) const {
    return attribute_from_json(attribute_to_json(kb_value), registry_.kind(attr));
}

Synthesizer::Synthesizer(SynthConfig config, const KnowledgeBase& kb, const GeoTable& geo,
                         const AttributeRegistry& registry)
    : config_(std::move(config)), kb_(kb), registry_(registry) {
    config_.validate();
    const ZoneTable& zones = ZoneTable::builtin();

    for (const auto& p : kb_.profiles()) {
        Profile prof{&p, {}, {}};
        for (const auto& [name, value] : p.attributes.items()) {
            prof.fixed.insert_or_assign(name, attribute_from_json(value, registry_.kind(name)));
        }
        const DeviceEntry* hw = p.hardware ? &*p.hardware : kb_.device(p.device);
        if (!hw) throw DataError("synth: profile " + p.name + " has no hardware catalog");
        for (const auto& [attr, valid] : *hw) {
            std::vector<AttributeValue> vals;
            for (const auto& v : valid.values) vals.push_back(typed(attr, v));
            if (!vals.empty()) prof.hardware.emplace_back(attr, std::move(vals));
        }
        profiles_.push_back(std::move(prof));
    }
    if (profiles_.empty()) throw DataError("synth: knowledge base has no profiles");

    for (const auto& [name, offsets] : zones.zones()) all_zones_.emplace_back(name, offsets);

    for (const auto& [name, info] : kb_.regions()) {
        Region r;
        r.name = name;
        r.languages = info.languages;
        std::vector<std::pair<std::uint32_t, int>> prefixes;
        for (const auto& row : geo.rows()) {
            if (row.region != name) continue;
            const auto pre = ipv4_prefix(row.prefix);
            if (!pre) continue;
            prefixes.push_back(*pre);
            r.offsets = row.offsets;
        }
        if (prefixes.empty()) continue;
        int widest = 32, narrowest = 0;
        for (const auto& [base, len] : prefixes) {
            widest = std::min(widest, len);
            narrowest = std::max(narrowest, len);
        }
        for (const auto& pre : prefixes) {
            if (pre.second == widest) r.human_prefixes.push_back(pre);
            if (pre.second == narrowest) r.bot_prefixes.push_back(pre);
        }
        for (const auto& z : info.zones) {
            const auto off = zones.find(z);
            if (off && off->intersects(r.offsets)) r.zones.push_back(z);
        }
        if (!r.zones.empty()) regions_.push_back(std::move(r));
    }
    if (regions_.empty()) throw DataError("synth: no knowledge-base region has both a geo prefix and a matching zone");

    // Resampling pools: every value any catalog entry or profile allows, plus
    // the implausible extras.
    auto add = [this](const std::string& attr, const AttributeValue& v) {
        auto& pool = pools_[attr];
        if (std::find(pool.begin(), pool.end(), v) == pool.end()) pool.push_back(v);
    };
    for (const auto& p : profiles_) {
        for (const auto& [attr, vals] : p.hardware)
            for (const auto& v : vals) add(attr, v);
        for (const auto& [attr, v] : p.fixed) add(attr, v);
    }
    for (const auto& [device, entry] : kb_.devices())
        for (const auto& [attr, valid] : entry)
            for (const auto& v : valid.values) add(attr, typed(attr, v));
    for (const auto& [attr, vals] : kb_.synth_extra_values())
        for (const auto& v : vals) add(attr, typed(attr, v));

    for (const auto& attr : config_.bot_alteration.attrs_altered) {
        if (attr == "ua.device" || attr == "user_agent") continue;
        if (!registry_.contains(attr)) throw UnknownAttributeError({attr});
        if (!pools_.count(attr)) throw DataError("synth: no values to resample for " + attr);
    }
}

Synthesizer::Identity Synthesizer::make_identity(std::uint64_t index, bool human) const {
    Identity id;
    id.index = index;
    id.human = human;
    id.rng = Rng(identity_seed(config_.seed, human, index));
    Rng& rng = id.rng;

    id.profile = static_cast<std::size_t>(rng.below(profiles_.size()));
    const Profile& prof = profiles_[id.profile];
    id.user_agent = prof.source->user_agent;
    id.attributes = prof.fixed;
    for (const auto& [attr, vals] : prof.hardware) id.attributes.insert_or_assign(attr, rng.pick(vals));

    id.region = static_cast<std::size_t>(rng.below(regions_.size()));
    const Region& region = regions_[id.region];
    const auto& prefixes = human ? region.human_prefixes : region.bot_prefixes;
    const auto [base, len] = rng.pick(prefixes);
    const std::uint32_t host_bits = len >= 32 ? 0 : static_cast<std::uint32_t>(rng.below(std::uint64_t{1} << (32 - len)));
    id.ip = ipv4_text(base | host_bits);
    id.attributes.insert_or_assign("timezone", AttributeValue::text(rng.pick(region.zones)));
    id.attributes.insert_or_assign("languages", AttributeValue::text_list(region.languages));
    id.cookie = (human ? "h-" : "b-") + hex_token(rng);

    if (human) {
        id.spoofed = rng.chance(config_.human_ua_spoof_prob);
        if (id.spoofed) {
            const AttributeValue& res = id.attributes.count("screen.resolution") ? id.attributes.at("screen.resolution")
                                                                                 : AttributeValue{};
            std::vector<std::size_t> targets;
            for (std::size_t i = 0; i < profiles_.size(); ++i) {
                const auto* src = profiles_[i].source;
                if (src->device == prof.source->device) continue;
                if (std::find(config_.human_spoof_devices.begin(), config_.human_spoof_devices.end(), src->device) ==
                    config_.human_spoof_devices.end())
                    continue;
                const DeviceEntry* hw = src->hardware ? &*src->hardware : kb_.device(src->device);
                const auto it = hw->find("screen.resolution");
                if (it != hw->end() && it->second.contains(res)) continue;
                targets.push_back(i);
            }
            if (targets.empty()) id.spoofed = false;
            else id.user_agent = profiles_[rng.pick(targets)].source->user_agent;
        }
        return id;
    }

    id.tag = rng.pick(config_.bot_services);
    const auto& alt = config_.bot_alteration;
    const bool all = !alt.independent && rng.chance(alt.alter_prob);
    for (const auto& attr : alt.attrs_altered) {
        if (alt.independent ? rng.chance(alt.alter_prob) : all) {
            if (attr == "ua.device" || attr == "user_agent") id.ua_altered = true;
            else id.altered.push_back(attr);
        }
    }
    id.geo_mismatch = rng.chance(alt.geo_mismatch_prob);
    if (id.geo_mismatch) {
        std::vector<const std::string*> far;
        for (const auto& [zone, off] : all_zones_)
            if (!off.empty() && !off.intersects(region.offsets)) far.push_back(&zone);
        if (far.empty()) id.geo_mismatch = false;
        else id.attributes.insert_or_assign("timezone", AttributeValue::text(*far[rng.below(far.size())]));
    }
    id.retain_cookie = rng.chance(alt.cookie_retention_prob);
    return id;
}

std::vector<FingerprintRecord> Synthesizer::emit(Identity& id) const {
    Rng& rng = id.rng;
    const auto n = rng.between(config_.requests_min, config_.requests_max);
    std::vector<FingerprintRecord> out;
    out.reserve(static_cast<std::size_t>(n));
    const bool altered = !id.altered.empty() || id.ua_altered || id.geo_mismatch;
    for (std::int64_t j = 0; j < n; ++j) {
        FingerprintRecord r;
        r.record_id = (id.human ? "h" : "b") + std::to_string(id.index) + "-" + std::to_string(j);
        r.timestamp_ms = config_.start_ms + rng.between(0, config_.span_ms);
        r.ip = id.ip;
        r.user_agent = id.user_agent;
        r.attributes = id.attributes;
        if (id.human) {
            r.cookie_id = id.cookie;
            r.label = SourceLabel::human();
            for (const auto& [service, m] : config_.services)
                r.verdicts[service] = {rng.chance(m.human_bot_prob) ? Decision::Bot : Decision::Human, service};
        } else {
            r.cookie_id = id.retain_cookie ? id.cookie : "b-" + hex_token(rng);
            r.url_token = id.tag;
            r.label = SourceLabel::bot(id.tag);
            if (id.ua_altered) r.user_agent = rng.pick(profiles_).source->user_agent;
            for (const auto& attr : id.altered) r.set(attr, rng.pick(pools_.find(attr)->second));
            for (const auto& [service, m] : config_.services) {
                const double evade = altered ? m.evasion_prob_given_altered : m.evasion_prob_given_unaltered;
                r.verdicts[service] = {rng.chance(evade) ? Decision::Human : Decision::Bot, service};
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<FingerprintRecord> Synthesizer::gen_human(std::uint64_t index) const {
    auto id = make_identity(index, true);
    return emit(id);
}

std::vector<FingerprintRecord> Synthesizer::gen_bot(std::uint64_t index) const {
    auto id = make_identity(index, false);
    return emit(id);
}

bool Synthesizer::bot_altered(std::uint64_t index) const {
    const auto id = make_identity(index, false);
    return !id.altered.empty() || id.ua_altered || id.geo_mismatch;
}

bool Synthesizer::human_spoofed(std::uint64_t index) const { return make_identity(index, true).spoofed; }

namespace {

template <class Emit>
void for_each_identity(const SynthConfig& c, Emit&& emit) {
    for (std::uint64_t i = 0; i < c.n_humans; ++i) emit(true, i);
    for (std::uint64_t i = 0; i < c.n_bots; ++i) emit(false, i);
}

std::vector<std::size_t> permutation(std::size_t n, std::uint64_t seed) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(splitmix64(seed ^ 0x5eed5eed5eed5eedULL));
    rng.shuffle(order);
    return order;
}

}  // namespace

std::vector<FingerprintRecord> Synthesizer::gen_records() const {
    std::vector<FingerprintRecord> all;
    for_each_identity(config_, [&](bool human, std::uint64_t i) {
        for (auto& r : human ? gen_human(i) : gen_bot(i)) all.push_back(std::move(r));
    });
    const auto order = permutation(all.size(), config_.seed);
    std::vector<FingerprintRecord> out;
    out.reserve(all.size());
    for (auto i : order) out.push_back(std::move(all[i]));
    return out;
}

std::size_t Synthesizer::gen_corpus(std::ostream& out) const {
    std::vector<std::string> lines;
    for_each_identity(config_, [&](bool human, std::uint64_t i) {
        for (const auto& r : human ? gen_human(i) : gen_bot(i)) lines.push_back(record_to_line(r));
    });
    for (auto i : permutation(lines.size(), config_.seed)) out << lines[i] << '\n';
    return lines.size();
}

}  // namespace fpscan
