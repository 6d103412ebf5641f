#include "fpscan/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "fpscan/categories.hpp"
#include "fpscan/discovery.hpp"
#include "fpscan/engine.hpp"
#include "fpscan/error.hpp"
#include "fpscan/eval.hpp"
#include "fpscan/findings.hpp"
#include "fpscan/io.hpp"
#include "fpscan/kb.hpp"
#include "fpscan/normalize.hpp"
#include "fpscan/record_io.hpp"
#include "fpscan/rules.hpp"
#include "fpscan/synth.hpp"

namespace fpscan {

namespace {

struct Globals {
    std::string registry, categories, kb, geo;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
    std::string format = "json";
};

// Lazily resolved data files; the digest covers whatever was loaded.
class Context {
public:
    Context(const Globals& g, std::ostream& out, std::ostream& err) : g_(g), out_(out), err_(err) {}

    const AttributeRegistry& registry() {
        if (!registry_) registry_ = std::make_unique<AttributeRegistry>(AttributeRegistry::parse(text(g_.registry, "registry.json")));
        return *registry_;
    }
    const AttributeCategorySet& categories() {
        if (!categories_)
            categories_ = std::make_unique<AttributeCategorySet>(parse_categories(text(g_.categories, "categories.json"), registry()));
        return *categories_;
    }
    const KnowledgeBase& kb() {
        if (!kb_) kb_ = std::make_unique<KnowledgeBase>(KnowledgeBase::parse(text(g_.kb, "kb.json"), registry()));
        return *kb_;
    }
    const GeoTable& geo(const std::string& override_spec = {}) {
        if (!geo_) geo_ = std::make_unique<GeoTable>(GeoTable::parse_csv(text(override_spec.empty() ? g_.geo : override_spec, "geo.csv")));
        return *geo_;
    }

    void note(const std::string& what, const std::string& spec, std::string_view contents) {
        digest_ = fnv1a64(contents, fnv1a64(what + "=", digest_));
        resolved_ += " " + what + "=" + (spec.empty() ? "builtin" : spec);
    }
    void note_value(const std::string& what, const std::string& value) { note(what, value, value); }

    void print_digest(const std::string& command) {
        if (!g_.quiet) err_ << "fpscan " << command << ": config " << hex64(digest_) << resolved_ << '\n';
    }
    void warn(const std::string& message) {
        if (!g_.quiet) err_ << "warning: " << message << '\n';
    }

    /// Writes to --out, or to the data stream when no file is given.
    void emit(const std::string& path, std::string_view contents) {
        if (path.empty() || path == "-") out_ << contents;
        else write_file(path, contents);
    }
    std::ostream& out() { return out_; }
    std::ostream& err() { return err_; }
    const Globals& globals() const { return g_; }

private:
    std::string text(const std::string& spec, std::string_view name) {
        std::string t = load_data_text(spec, name);
        note(std::string(name), spec, t);
        return t;
    }

    const Globals& g_;
    std::ostream& out_;
    std::ostream& err_;
    std::unique_ptr<AttributeRegistry> registry_;
    std::unique_ptr<AttributeCategorySet> categories_;
    std::unique_ptr<KnowledgeBase> kb_;
    std::unique_ptr<GeoTable> geo_;
    std::uint64_t digest_ = fnv1a64("fpscan-config-v1");
    std::string resolved_;
};

std::string read_input(const std::string& path) {
    if (path == "-") {
        std::ostringstream ss;
        ss << std::cin.rdbuf();
        return ss.str();
    }
    return read_file(path);
}

nlohmann::json parse_json_file(const std::string& path) {
    const std::string text = read_input(path);
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
        throw ParseError(path, line, col, "malformed JSON");
    }
}

class OutputFile {
public:
    OutputFile(const std::string& path, std::ostream& fallback) {
        if (path.empty() || path == "-") {
            stream_ = &fallback;
        } else {
            file_.open(path, std::ios::binary | std::ios::trunc);
            if (!file_) throw Error("cannot open " + path + " for writing");
            stream_ = &file_;
        }
    }
    std::ostream& get() { return *stream_; }
    void close() {
        stream_->flush();
        if (file_.is_open()) {
            file_.close();
            if (file_.fail()) throw Error("write failed");
        }
    }

private:
    std::ofstream file_;
    std::ostream* stream_ = nullptr;
};

// ---- ingest

struct IngestArgs {
    std::string input = "-", out, geo, block_ips, block_asns;
};

int cmd_ingest(Context& ctx, const IngestArgs& a) {
    const auto& registry = ctx.registry();
    const auto& geo = ctx.geo(a.geo);
    BlockLists blocklists;
    const bool use_blocklists = !a.block_ips.empty() || !a.block_asns.empty();
    if (!a.block_ips.empty()) {
        const auto t = read_file(a.block_ips);
        ctx.note("blocklist-ips", a.block_ips, t);
        blocklists.ips = BlockLists::parse_ip_list(t, a.block_ips);
    }
    if (!a.block_asns.empty()) {
        const auto t = read_file(a.block_asns);
        ctx.note("blocklist-asns", a.block_asns, t);
        blocklists.asns = BlockLists::parse_asn_map(t, a.block_asns);
    }
    ctx.print_digest("ingest");

    Normalizer normalizer(registry, geo);
    IngestOptions options;
    options.source_name = a.input == "-" ? "stdin" : a.input;
    if (use_blocklists) options.blocklists = &blocklists;

    std::ifstream file;
    std::istream* in = &std::cin;
    if (a.input != "-") {
        file.open(a.input, std::ios::binary);
        if (!file) throw Error("cannot open " + a.input);
        in = &file;
    }
    OutputFile out(a.out, ctx.out());
    std::string line;
    const auto result = ingest_each(*in, normalizer, options, [&](FingerprintRecord&& r) {
        line = record_to_line(r);
        line += '\n';
        out.get() << line;
    });
    out.close();
    for (const auto& e : result.errors) ctx.warn(options.source_name + ":" + std::to_string(e.line) + ": " + e.message);
    for (const auto& [code, n] : result.diagnostics.counts()) ctx.warn(code + " x" + std::to_string(n));
    return kExitOk;
}

// ---- discover

struct DiscoverArgs {
    std::string records = "-", out, mode = "evaded", baseline;
    std::uint64_t min_support = 1;
    std::size_t top_k = 0;
    bool ascending = false, include_absent = false;
};

int cmd_discover(Context& ctx, const DiscoverArgs& a) {
    const auto mode = parse_filter_mode(a.mode);
    if (!mode) throw CLI::ValidationError("--mode", "expected evaded, bots or all");
    const auto& registry = ctx.registry();
    const auto& categories = ctx.categories();
    ctx.print_digest("discover");
    std::istringstream in(read_input(a.records));
    const auto records = read_records(in, registry, a.records);
    DiscoverOptions options;
    options.count.filter = {*mode, a.baseline};
    options.count.include_absent_a = a.include_absent;
    options.min_support = a.min_support;
    options.top_k = a.top_k;
    options.ascending = a.ascending;
    const auto reports = discover(records, categories, options, registry);
    ctx.emit(a.out, reports_to_json(reports).dump(2) + "\n");
    return kExitOk;
}

// ---- adjudicate

struct AdjudicateArgs {
    std::string reports, adjudication, out;
    bool kb_auto = false, no_temporal = false;
};

int cmd_adjudicate(Context& ctx, const AdjudicateArgs& a) {
    if (a.adjudication.empty() && !a.kb_auto) throw CLI::ValidationError("adjudicate", "give --adjudication and/or --kb-auto");
    if (a.kb_auto && a.reports.empty()) throw CLI::ValidationError("--kb-auto", "needs --reports");
    const auto& registry = ctx.registry();
    const KnowledgeBase* kb = a.kb_auto ? &ctx.kb() : nullptr;
    ctx.print_digest("adjudicate");

    std::vector<CandidateReport> reports;
    if (!a.reports.empty()) reports = reports_from_json(parse_json_file(a.reports));
    FindingsFile findings;
    if (!a.adjudication.empty()) {
        for (const auto& adj : adjudications_from_json(parse_json_file(a.adjudication), registry)) {
            if (reports.empty()) {
                auto f = adjudication_findings(adj);
                findings.spatial.insert(findings.spatial.end(), f.begin(), f.end());
                continue;
            }
            const CandidateReport* report = nullptr;
            for (const auto& r : reports)
                if (r.category == adj.category) report = &r;
            if (!report) {
                ctx.warn("no report for category " + adj.category);
                continue;
            }
            auto result = apply_adjudication(*report, adj);
            findings.spatial.insert(findings.spatial.end(), result.findings.begin(), result.findings.end());
            if (!result.pending.empty())
                ctx.warn(adj.category + ": " + std::to_string(result.pending.size()) + " entries still unknown");
            if (result.unmatched)
                ctx.warn(adj.category + ": " + std::to_string(result.unmatched) + " entries match no candidate");
        }
    }
    if (kb) {
        for (const auto& r : reports) {
            auto f = kb_adjudicate(r, *kb);
            findings.spatial.insert(findings.spatial.end(), f.begin(), f.end());
        }
    }
    if (!a.no_temporal) findings.temporal = default_temporal_findings();
    ctx.emit(a.out, findings_to_json(findings).dump(2) + "\n");
    return kExitOk;
}

// ---- compile

struct CompileArgs {
    std::string findings, out;
};

int cmd_compile(Context& ctx, const CompileArgs& a) {
    const auto& registry = ctx.registry();
    const auto& kb = ctx.kb();
    ctx.print_digest("compile");
    const auto findings = findings_from_json(parse_json_file(a.findings), registry);
    const auto rules = compile(findings, kb, registry);
    ctx.emit(a.out, serialize_rules(rules));
    return kExitOk;
}

// ---- detect

struct DetectArgs {
    std::string rules, records = "-", state_in, state_out, out;
    std::optional<std::int64_t> ttl_ms;
    bool stats = false;
};

int cmd_detect(Context& ctx, const DetectArgs& a) {
    const auto& registry = ctx.registry();
    const std::string rules_text = load_data_text(a.rules, "golden.rules");
    ctx.note("rules", a.rules, rules_text);
    ctx.print_digest("detect");
    const auto rules = parse_rules(rules_text, registry, a.rules.empty() ? "golden.rules" : a.rules);
    RuleEngine engine(rules);
    TemporalState state;
    if (!a.state_in.empty()) state = TemporalState::restore(read_file(a.state_in));
    if (a.ttl_ms) {
        auto c = state.config();
        c.ttl_ms = *a.ttl_ms;
        state.set_config(std::move(c));
    }
    const std::string text = read_input(a.records);
    OutputFile out(a.out, ctx.out());
    std::string line;
    const auto stats = detect_jsonl(
        engine, state, text,
        [&](const DetectionDecision& d) {
            line = decision_to_line(d);
            line += '\n';
            out.get() << line;
        },
        a.records == "-" ? "stdin" : a.records, registry);
    out.close();
    if (!a.state_out.empty()) write_file(a.state_out, state.snapshot());
    if (a.stats) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "records %zu, index %.2fs, parse %.2fs, evaluate %.2fs (%.0f records/s)\n",
                      stats.records, stats.index_seconds, stats.parse_seconds, stats.evaluate_seconds,
                      stats.evaluate_seconds > 0 ? double(stats.records) / stats.evaluate_seconds : 0.0);
        ctx.err() << buf;
    }
    return kExitOk;
}

// ---- eval

struct EvalArgs {
    std::string decisions, records, out, split_mode = "evaded";
    std::vector<std::string> baseline;
    std::optional<double> split;
    std::uint64_t min_support = 1;
};

int cmd_eval(Context& ctx, const EvalArgs& a) {
    const auto format = parse_report_format(ctx.globals().format);
    if (!format) throw CLI::ValidationError("--format", "expected json, csv or text");
    const auto split_mode = parse_filter_mode(a.split_mode);
    if (!split_mode) throw CLI::ValidationError("--split-mode", "expected evaded, bots or all");
    const auto& registry = ctx.registry();
    if (a.split) {
        ctx.categories();
        ctx.kb();
    }
    const std::uint64_t seed = ctx.globals().seed.value_or(0);
    ctx.note_value("seed", std::to_string(seed));
    ctx.print_digest("eval");

    std::vector<DetectionDecision> decisions;
    {
        std::istringstream in(read_input(a.decisions));
        decisions = read_decisions(in, a.decisions);
    }
    const std::string records_text = read_file(a.records);
    std::vector<EvalRow> rows;
    {
        std::istringstream in(records_text);
        rows = read_eval_rows(in, a.records);
    }
    EvalReport report = compute_rates(rows, decisions, a.baseline);
    for (const auto& s : report.services)
        if (s.missing_baseline)
            ctx.warn(s.service + ": " + std::to_string(s.missing_baseline) + " records without a verdict excluded");
    if (a.split) {
        std::istringstream in(records_text);
        const auto records = read_records(in, registry, a.records);
        SplitOptions options;
        options.fraction = *a.split;
        options.seed = seed;
        options.filter = *split_mode;
        options.baseline_service = a.baseline.empty() ? std::string{} : a.baseline.front();
        options.min_support = a.min_support;
        report.split = split_eval(records, options, ctx.categories(), ctx.kb(), a.baseline, registry);
    }
    ctx.emit(a.out, emit_report(report, *format));
    return kExitOk;
}

// ---- synth

struct SynthArgs {
    std::string config, out;
};

int cmd_synth(Context& ctx, const SynthArgs& a) {
    const auto& registry = ctx.registry();
    const auto& kb = ctx.kb();
    const auto& geo = ctx.geo();
    SynthConfig config;
    if (!a.config.empty()) {
        const std::string text = load_data_text(a.config, "bench.json");
        ctx.note("config", a.config, text);
        try {
            config = synth_config_from_json(nlohmann::json::parse(text));
        } catch (const nlohmann::json::parse_error& e) {
            const auto [line, col] = line_column(text, e.byte == 0 ? 0 : e.byte - 1);
            throw ParseError(a.config, line, col, "malformed JSON");
        }
    }
    if (ctx.globals().seed) config.seed = *ctx.globals().seed;
    ctx.note_value("seed", std::to_string(config.seed));
    ctx.print_digest("synth");
    Synthesizer synth(config, kb, geo, registry);
    OutputFile out(a.out, ctx.out());
    synth.gen_corpus(out.get());
    out.close();
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Detects spoofed browser fingerprints from inconsistent attribute combinations.", "fpscan"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--registry", g.registry, "Attribute registry JSON (default: built-in)");
    app.add_option("--categories", g.categories, "Attribute categories JSON (default: built-in)");
    app.add_option("--kb", g.kb, "Knowledge base JSON (default: built-in)");
    app.add_option("--geo-table", g.geo, "IP prefix to region CSV (default: built-in)");
    app.add_option("--seed", g.seed, "Seed for synth and split evaluation");
    app.add_flag("--quiet,-q", g.quiet, "Suppress warnings and the config line");
    app.add_option("--format", g.format, "Report format for eval: json, csv or text")->default_str("json");

    IngestArgs ingest;
    auto* c_ingest = app.add_subcommand("ingest", "Normalize raw request logs into records JSONL");
    c_ingest->add_option("--input,-i", ingest.input, "Raw JSONL log, - for stdin")->default_str("-");
    c_ingest->add_option("--geo", ingest.geo, "IP prefix CSV overriding --geo-table");
    c_ingest->add_option("--blocklist-ips", ingest.block_ips, "Newline-separated IP block list");
    c_ingest->add_option("--blocklist-asns", ingest.block_asns, "CSV asn,flag block list");
    c_ingest->add_option("--out,-o", ingest.out, "Output records JSONL (default: stdout)");

    DiscoverArgs disc;
    auto* c_disc = app.add_subcommand("discover", "Count attribute pairs and rank candidate inconsistencies");
    c_disc->add_option("--records,-r", disc.records, "Records JSONL, - for stdin")->default_str("-");
    c_disc->add_option("--mode", disc.mode, "Rows counted: evaded, bots or all")->default_str("evaded");
    c_disc->add_option("--baseline", disc.baseline, "Service whose Human verdict marks evasion (default: any)");
    c_disc->add_option("--min-support", disc.min_support, "Drop tuples seen on fewer rows")->default_str("1");
    c_disc->add_option("--top-k", disc.top_k, "Tuples kept per attribute pair, 0 for all")->default_str("0");
    c_disc->add_flag("--ascending", disc.ascending, "Fewest distinct values first");
    c_disc->add_flag("--include-absent", disc.include_absent, "Group rows whose first attribute is missing");
    c_disc->add_option("--out,-o", disc.out, "Output reports JSON (default: stdout)");

    AdjudicateArgs adj;
    auto* c_adj = app.add_subcommand("adjudicate", "Turn reviewed candidates into findings");
    c_adj->add_option("--reports", adj.reports, "Candidate reports JSON from discover");
    c_adj->add_option("--adjudication", adj.adjudication, "Reviewer verdicts JSON");
    c_adj->add_flag("--kb-auto", adj.kb_auto, "Judge every candidate against the knowledge base");
    c_adj->add_flag("--no-temporal", adj.no_temporal, "Leave out the default temporal watches");
    c_adj->add_option("--out,-o", adj.out, "Output findings JSON (default: stdout)");

    CompileArgs comp;
    auto* c_comp = app.add_subcommand("compile", "Compile findings into a filter list");
    c_comp->add_option("--findings,-f", comp.findings, "Findings JSON")->required();
    c_comp->add_option("--out,-o", comp.out, "Output filter list (default: stdout)");

    DetectArgs det;
    auto* c_det = app.add_subcommand("detect", "Apply a filter list to records");
    c_det->add_option("--rules", det.rules, "Filter list (default: built-in golden list)");
    c_det->add_option("--records,-r", det.records, "Records JSONL, - for stdin")->default_str("-");
    c_det->add_option("--state-in", det.state_in, "Temporal state snapshot to resume from");
    c_det->add_option("--state-out", det.state_out, "Write the temporal state snapshot here");
    c_det->add_option("--ttl-ms", det.ttl_ms, "Forget key histories idle this long");
    c_det->add_option("--out,-o", det.out, "Output decisions JSONL (default: stdout)");
    c_det->add_flag("--stats", det.stats, "Print timing of the indexing, parsing and evaluation passes to stderr");

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Detection rates per baseline service and mode");
    c_eval->add_option("--decisions,-d", ev.decisions, "Decisions JSONL from detect")->required();
    c_eval->add_option("--records,-r", ev.records, "Records JSONL the decisions were made on")->required();
    c_eval->add_option("--baseline", ev.baseline, "Baseline services (default: every service seen)")->delimiter(',');
    c_eval->add_option("--split", ev.split, "Train fraction for the generalization split");
    c_eval->add_option("--split-mode", ev.split_mode, "Rows counted by split discovery: evaded, bots or all")
        ->default_str("evaded");
    c_eval->add_option("--min-support", ev.min_support, "Minimum tuple support in split discovery")->default_str("1");
    c_eval->add_option("--out,-o", ev.out, "Output report (default: stdout)");

    SynthArgs syn;
    auto* c_syn = app.add_subcommand("synth", "Generate a labeled synthetic corpus");
    c_syn->add_option("--config,-c", syn.config, "Generator config JSON (builtin:bench.json for the benchmark)");
    c_syn->add_option("--out,-o", syn.out, "Output raw JSONL (default: stdout)");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    std::vector<std::string> reversed;
    if (!args.empty()) reversed.assign(args.rbegin(), args.rend() - 1);
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    Context ctx(g, out, err);
    try {
        if (c_ingest->parsed()) return cmd_ingest(ctx, ingest);
        if (c_disc->parsed()) return cmd_discover(ctx, disc);
        if (c_adj->parsed()) return cmd_adjudicate(ctx, adj);
        if (c_comp->parsed()) return cmd_compile(ctx, comp);
        if (c_det->parsed()) return cmd_detect(ctx, det);
        if (c_eval->parsed()) return cmd_eval(ctx, ev);
        if (c_syn->parsed()) return cmd_synth(ctx, syn);
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}

}  // namespace fpscan
