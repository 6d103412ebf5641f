#include "fpscan/eval.hpp"
#include "fpscan/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "fpscan/error.hpp"
#include "fpscan/findings.hpp"
#include "fpscan/io.hpp"
#include "fpscan/record_io.hpp"
#include "fpscan/temporal.hpp"

namespace fpscan {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(EvalMode mode) {
    switch (mode) {
        case EvalMode::None: return "None";
        case EvalMode::Spatial: return "Spatial";
        case EvalMode::Temporal: return "Temporal";
        case EvalMode::Combined: return "Combined";
    }
    return "?";
}

bool mode_flags(const DetectionDecision& d, EvalMode mode) {
    const bool spatial = d.spatial_flag || d.geo_flag;
    const bool temporal = !d.temporal_flags.empty();
    switch (mode) {
        case EvalMode::None: return false;
        case EvalMode::Spatial: return spatial;
        case EvalMode::Temporal: return temporal;
        case EvalMode::Combined: return spatial || temporal;
    }
    return false;
}

EvalRow eval_row(const FingerprintRecord& record) { return {record.record_id, record.label, record.verdicts}; }

std::vector<EvalRow> read_eval_rows(std::istream& in, const std::string& source) {
    std::vector<EvalRow> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(source, lineno, 1, e.what());
        }
        if (!j.is_object() || !j.contains("record_id") || !j["record_id"].is_string())
            throw DataError(source + ":" + std::to_string(lineno) + ": record without record_id");
        EvalRow row;
        row.record_id = j["record_id"].get<std::string>();
        if (auto it = j.find("label"); it != j.end() && it->is_string()) row.label = parse_label(it->get<std::string>());
        if (auto it = j.find("verdicts"); it != j.end() && it->is_object()) {
            for (const auto& [service, v] : it->items()) {
                if (!v.is_string() || (v != "bot" && v != "human"))
                    throw DataError(source + ":" + std::to_string(lineno) + ": bad verdict for " + service);
                row.verdicts[service] = {v == "bot" ? Decision::Bot : Decision::Human, service};
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

double RateCounts::rate(EvalMode m) const {
    return total ? double(detected[static_cast<std::size_t>(m)]) / double(total) : 0.0;
}

void RateCounts::merge(const RateCounts& other) {
    total += other.total;
    for (std::size_t i = 0; i < detected.size(); ++i) detected[i] += other.detected[i];
}

const ServiceRates* EvalReport::service(std::string_view name) const {
    for (const auto& s : services)
        if (s.service == name) return &s;
    return nullptr;
}

namespace {

void count_bot(RateCounts& c, bool baseline_bot, const DetectionDecision& d) {
    ++c.total;
    for (std::size_t i = 0; i < kEvalModes.size(); ++i)
        if (baseline_bot || mode_flags(d, kEvalModes[i])) ++c.detected[i];
}

std::vector<std::string> services_seen(const std::vector<EvalRow>& rows) {
    std::set<std::string> seen;
    for (const auto& r : rows)
        for (const auto& [service, v] : r.verdicts) seen.insert(service);
    return {seen.begin(), seen.end()};
}

}  // namespace

EvalReport compute_rates(const std::vector<EvalRow>& rows, const std::vector<DetectionDecision>& decisions,
                         std::vector<std::string> services) {
    std::unordered_map<std::string_view, const DetectionDecision*> by_id;
    by_id.reserve(decisions.size());
    for (const auto& d : decisions) by_id.emplace(d.record_id, &d);
    std::vector<const DetectionDecision*> joined;
    joined.reserve(rows.size());
    for (const auto& r : rows) {
        const auto it = by_id.find(r.record_id);
        if (it == by_id.end()) throw DataError("eval: no decision for record " + r.record_id);
        joined.push_back(it->second);
    }
    if (services.empty()) services = services_seen(rows);

    EvalReport report;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].label.is_human()) continue;
        ++report.humans;
        if (!joined[i]->is_bot_by_rules) ++report.humans_unflagged;
    }
    for (const auto& service : services) {
        ServiceRates s;
        s.service = service;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const auto& row = rows[i];
            if (row.label.kind == SourceLabel::Kind::Unknown) continue;
            const auto v = row.verdicts.find(service);
            if (v == row.verdicts.end()) {
                ++s.missing_baseline;
                continue;
            }
            const bool baseline_bot = v->second.decision == Decision::Bot;
            const auto& d = *joined[i];
            if (row.label.is_bot()) {
                count_bot(s.bots, baseline_bot, d);
                count_bot(s.by_tag[row.label.tag], baseline_bot, d);
            } else {
                ++s.humans;
                if (!baseline_bot && !d.is_bot_by_rules) ++s.humans_passed;
            }
        }
        report.services.push_back(std::move(s));
    }
    return report;
}

RuleSet auto_rules(const std::vector<FingerprintRecord>& records, const AttributeCategorySet& categories,
                   const KnowledgeBase& kb, const RowFilter& filter, std::uint64_t min_support,
                   const AttributeRegistry& registry) {
    DiscoverOptions options;
    options.count.filter = filter;
    options.min_support = min_support;
    FindingsFile findings;
    for (const auto& report : discover(records, categories, options, registry)) {
        auto f = kb_adjudicate(report, kb);
        findings.spatial.insert(findings.spatial.end(), f.begin(), f.end());
    }
    findings.temporal = default_temporal_findings();
    return compile(findings, kb, registry);
}

bool in_train_split(std::string_view record_id, double fraction, std::uint64_t seed) {
    const std::uint64_t h = splitmix64(fnv1a64(record_id, 0xcbf29ce484222325ULL ^ seed));
    return double(h >> 11) * 0x1.0p-53 < fraction;
}

namespace {

RateCounts rates_on(const RuleSet& rules, const std::vector<FingerprintRecord>& records,
                    const std::string& service) {
    RuleEngine engine(rules);
    TemporalState state;
    const auto decisions = detect(engine, state, records);
    std::vector<EvalRow> rows;
    rows.reserve(records.size());
    for (const auto& r : records) rows.push_back(eval_row(r));
    return compute_rates(rows, decisions, {service}).services.front().bots;
}

}  // namespace

SplitReport split_eval(const std::vector<FingerprintRecord>& records, const SplitOptions& options,
                       const AttributeCategorySet& categories, const KnowledgeBase& kb,
                       std::vector<std::string> services, const AttributeRegistry& registry) {
    if (!(options.fraction > 0.0 && options.fraction < 1.0))
        throw DataError("split: train fraction must lie strictly between 0 and 1");
    std::vector<FingerprintRecord> train, test;
    for (const auto& r : records) (in_train_split(r.record_id, options.fraction, options.seed) ? train : test).push_back(r);
    if (train.empty() || test.empty()) throw DataError("split: degenerate split (one side is empty)");

    if (services.empty()) {
        std::vector<EvalRow> rows;
        for (const auto& r : records) rows.push_back(eval_row(r));
        services = services_seen(rows);
    }
    const RowFilter filter{options.filter, options.baseline_service};
    const RuleSet train_rules = auto_rules(train, categories, kb, filter, options.min_support, registry);
    const RuleSet reference_rules = auto_rules(records, categories, kb, filter, options.min_support, registry);

    SplitReport out;
    out.train_fraction = options.fraction;
    out.seed = options.seed;
    out.train_records = train.size();
    out.test_records = test.size();
    out.train_rules = train_rules.rules.size();
    out.reference_rules = reference_rules.rules.size();
    for (const auto& service : services) {
        SplitServiceRates s;
        s.service = service;
        s.train = rates_on(train_rules, train, service);
        s.test = rates_on(train_rules, test, service);
        s.reference = rates_on(reference_rules, test, service);
        out.services.push_back(std::move(s));
    }
    return out;
}

std::optional<ReportFormat> parse_report_format(std::string_view text) {
    if (text == "json") return ReportFormat::Json;
    if (text == "csv") return ReportFormat::Csv;
    if (text == "text" || text == "table") return ReportFormat::Text;
    return std::nullopt;
}

namespace {

ordered_json counts_to_json(const RateCounts& c) {
    ordered_json j;
    j["total"] = c.total;
    ordered_json detected = ordered_json::object(), rates = ordered_json::object();
    for (std::size_t i = 0; i < kEvalModes.size(); ++i) {
        detected[std::string(to_string(kEvalModes[i]))] = c.detected[i];
        rates[std::string(to_string(kEvalModes[i]))] = c.rate(kEvalModes[i]);
    }
    j["detected"] = detected;
    j["rates"] = rates;
    return j;
}

RateCounts counts_from_json(const json& j) {
    RateCounts c;
    c.total = j.at("total").get<std::uint64_t>();
    for (std::size_t i = 0; i < kEvalModes.size(); ++i)
        c.detected[i] = j.at("detected").at(std::string(to_string(kEvalModes[i]))).get<std::uint64_t>();
    return c;
}

std::string fixed(double v, int digits = 4) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

ordered_json report_to_json(const EvalReport& report) {
    ordered_json j;
    j["format"] = "fpscan-eval";
    j["version"] = 1;
    j["humans"] = report.humans;
    j["humans_unflagged"] = report.humans_unflagged;
    j["tnr_on_humans"] = report.tnr_on_humans();
    ordered_json services = ordered_json::array();
    for (const auto& s : report.services) {
        ordered_json o;
        o["service"] = s.service;
        o["bots"] = counts_to_json(s.bots);
        o["baseline_detection_rate"] = s.bots.rate(EvalMode::None);
        o["spatial_rate"] = s.bots.rate(EvalMode::Spatial);
        o["temporal_rate"] = s.bots.rate(EvalMode::Temporal);
        o["combined_rate"] = s.bots.rate(EvalMode::Combined);
        o["missing_baseline"] = s.missing_baseline;
        o["humans"] = s.humans;
        o["humans_passed"] = s.humans_passed;
        o["tnr_combined"] = s.tnr_combined();
        ordered_json tags = ordered_json::object();
        for (const auto& [tag, c] : s.by_tag) tags[tag] = counts_to_json(c);
        o["by_tag"] = tags;
        services.push_back(o);
    }
    j["services"] = services;
    if (report.split) {
        const auto& sp = *report.split;
        ordered_json o;
        o["train_fraction"] = sp.train_fraction;
        o["seed"] = sp.seed;
        o["train_records"] = sp.train_records;
        o["test_records"] = sp.test_records;
        o["train_rules"] = sp.train_rules;
        o["reference_rules"] = sp.reference_rules;
        ordered_json rows = ordered_json::array();
        for (const auto& s : sp.services) {
            ordered_json r;
            r["service"] = s.service;
            r["train_rates"] = counts_to_json(s.train);
            r["test_rates"] = counts_to_json(s.test);
            r["reference_rates"] = counts_to_json(s.reference);
            r["drop"] = s.drop();
            rows.push_back(r);
        }
        o["services"] = rows;
        j["split"] = o;
    }
    return j;
}

EvalReport eval_report_from_json(const json& j) {
    try {
        if (j.value("format", "") != "fpscan-eval" || j.value("version", 0) != 1)
            throw DataError("eval report: unsupported format");
        EvalReport r;
        r.humans = j.at("humans").get<std::uint64_t>();
        r.humans_unflagged = j.at("humans_unflagged").get<std::uint64_t>();
        for (const auto& o : j.at("services")) {
            ServiceRates s;
            s.service = o.at("service").get<std::string>();
            s.bots = counts_from_json(o.at("bots"));
            s.missing_baseline = o.at("missing_baseline").get<std::uint64_t>();
            s.humans = o.at("humans").get<std::uint64_t>();
            s.humans_passed = o.at("humans_passed").get<std::uint64_t>();
            for (const auto& [tag, c] : o.at("by_tag").items()) s.by_tag[tag] = counts_from_json(c);
            r.services.push_back(std::move(s));
        }
        if (j.contains("split")) {
            const auto& o = j.at("split");
            SplitReport sp;
            sp.train_fraction = o.at("train_fraction").get<double>();
            sp.seed = o.at("seed").get<std::uint64_t>();
            sp.train_records = o.at("train_records").get<std::uint64_t>();
            sp.test_records = o.at("test_records").get<std::uint64_t>();
            sp.train_rules = o.at("train_rules").get<std::size_t>();
            sp.reference_rules = o.at("reference_rules").get<std::size_t>();
            for (const auto& row : o.at("services")) {
                SplitServiceRates s;
                s.service = row.at("service").get<std::string>();
                s.train = counts_from_json(row.at("train_rates"));
                s.test = counts_from_json(row.at("test_rates"));
                s.reference = counts_from_json(row.at("reference_rates"));
                sp.services.push_back(std::move(s));
            }
            r.split = std::move(sp);
        }
        return r;
    } catch (const json::exception& e) {
        throw DataError(std::string("eval report: ") + e.what());
    }
}

std::string emit_report(const EvalReport& report, ReportFormat format) {
    std::ostringstream out;
    switch (format) {
        case ReportFormat::Json:
            out << report_to_json(report).dump(2) << '\n';
            break;
        case ReportFormat::Csv:
            out << "service,mode,bots,detected,rate,missing_baseline,tnr_combined\n";
            for (const auto& s : report.services)
                for (std::size_t i = 0; i < kEvalModes.size(); ++i)
                    out << s.service << ',' << to_string(kEvalModes[i]) << ',' << s.bots.total << ','
                        << s.bots.detected[i] << ',' << fixed(s.bots.rate(kEvalModes[i]), 6) << ','
                        << s.missing_baseline << ',' << fixed(s.tnr_combined(), 6) << '\n';
            break;
        case ReportFormat::Text: {
            char buf[64];
            out << "Mode      ";
            for (const auto& s : report.services) {
                std::snprintf(buf, sizeof buf, " %12s", s.service.c_str());
                out << buf;
            }
            out << '\n';
            for (auto mode : kEvalModes) {
                std::snprintf(buf, sizeof buf, "%-10s", std::string(to_string(mode)).c_str());
                out << buf;
                for (const auto& s : report.services) {
                    std::snprintf(buf, sizeof buf, " %11.2f%%", 100.0 * s.bots.rate(mode));
                    out << buf;
                }
                out << '\n';
            }
            out << "TNR on humans (rules): " << fixed(100.0 * report.tnr_on_humans(), 2) << "% of " << report.humans
                << '\n';
            if (report.split) {
                out << "Split " << fixed(report.split->train_fraction, 2) << " (train " << report.split->train_records
                    << ", test " << report.split->test_records << ")\n";
                for (const auto& s : report.split->services)
                    out << "  " << s.service << ": test combined " << fixed(100.0 * s.test.rate(EvalMode::Combined), 2)
                        << "%, reference " << fixed(100.0 * s.reference.rate(EvalMode::Combined), 2) << "%, drop "
                        << fixed(100.0 * s.drop(), 2) << "%\n";
            }
            break;
        }
    }
    return out.str();
}

}  // namespace fpscan
