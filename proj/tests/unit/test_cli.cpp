#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "fpscan/cli.hpp"
#include "fpscan/io.hpp"

using namespace fpscan;
namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "fpscan");
    std::ostringstream out, err;
    Run r;
    r.code = run_cli(args, out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

struct TempDir {
    fs::path path;
    TempDir() {
        static int counter = 0;
        path = fs::temp_directory_path() / ("fpscan-cli-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

void write_small_config(const TempDir& dir) {
    write_file(dir / "synth.json", R"({"seed": 5, "n_humans": 60, "n_bots": 120, "requests_per_identity": {"min": 1, "max": 4},
        "bot_alteration": {"alter_prob": 0.3, "geo_mismatch_prob": 0.2, "cookie_retention_prob": 0.5}})");
}

}  // namespace

TEST_CASE("help and usage errors") {
    auto help = cli({"--help"});
    CHECK(help.code == kExitOk);
    CHECK(help.out.find("detect") != std::string::npos);
    CHECK(cli({}).code == kExitUsage);
    CHECK(cli({"frobnicate"}).code == kExitUsage);
    CHECK(cli({"compile"}).code == kExitUsage);
    CHECK(cli({"detect", "--bogus"}).code == kExitUsage);
    CHECK(cli({"eval", "--decisions", "x"}).code == kExitUsage);
    auto sub = cli({"detect", "--help"});
    CHECK(sub.code == kExitOk);
    CHECK(sub.out.find("--state-in") != std::string::npos);
}

TEST_CASE("data errors") {
    TempDir dir;
    auto missing = cli({"-q", "detect", "--records", dir / "nope.jsonl"});
    CHECK(missing.code == kExitData);
    CHECK_FALSE(missing.err.empty());

    write_file(dir / "bad.rules", "spatial r1: ua.device ==\n");
    write_file(dir / "empty.jsonl", "");
    auto bad = cli({"-q", "detect", "--rules", dir / "bad.rules", "--records", dir / "empty.jsonl"});
    CHECK(bad.code == kExitData);
    CHECK(bad.err.find("bad.rules:1:") != std::string::npos);

    write_file(dir / "broken.jsonl", "{\"record_id\":\"a\",\"timestamp\":1}\n{oops\n");
    auto broken = cli({"-q", "detect", "--records", dir / "broken.jsonl"});
    CHECK(broken.code == kExitData);
    CHECK(broken.err.find(":2") != std::string::npos);
}

TEST_CASE("config digest goes to stderr") {
    TempDir dir;
    write_file(dir / "empty.jsonl", "");
    auto r = cli({"detect", "--records", dir / "empty.jsonl"});
    CHECK(r.code == kExitOk);
    CHECK(r.out.empty());
    CHECK(r.err.find("fpscan detect: config ") != std::string::npos);
    auto q = cli({"-q", "detect", "--records", dir / "empty.jsonl"});
    CHECK(q.err.empty());
    // the digest depends on the resolved inputs
    write_file(dir / "one.rules", "spatial r1: hdr == true\n");
    auto other = cli({"detect", "--rules", dir / "one.rules", "--records", dir / "empty.jsonl"});
    CHECK(other.err.substr(0, other.err.find(' ', 22)) != r.err.substr(0, r.err.find(' ', 22)));
}

TEST_CASE("empty ruleset flags nothing") {
    TempDir dir;
    write_small_config(dir);
    REQUIRE(cli({"-q", "synth", "-c", dir / "synth.json", "-o", dir / "raw.jsonl"}).code == kExitOk);
    REQUIRE(cli({"-q", "ingest", "-i", dir / "raw.jsonl", "-o", dir / "rec.jsonl"}).code == kExitOk);
    write_file(dir / "empty.rules", "# nothing\n");
    auto r = cli({"-q", "detect", "--rules", dir / "empty.rules", "--records", dir / "rec.jsonl"});
    REQUIRE(r.code == kExitOk);
    std::istringstream in(r.out);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        auto j = nlohmann::json::parse(line);
        CHECK(j["is_bot_by_rules"] == false);
        CHECK(j["geo_flag"] == false);
        CHECK(j["temporal_flags"].empty());
        ++n;
    }
    CHECK(n > 180);
}

TEST_CASE("pipeline is deterministic and resumable") {
    TempDir dir;
    write_small_config(dir);
    auto pipeline = [&](const std::string& tag) {
        auto p = [&](const std::string& name) { return dir / (tag + name); };
        REQUIRE(cli({"-q", "--seed", "9", "synth", "-c", dir / "synth.json", "-o", p("raw.jsonl")}).code == 0);
        REQUIRE(cli({"-q", "ingest", "-i", p("raw.jsonl"), "-o", p("rec.jsonl")}).code == 0);
        REQUIRE(cli({"-q", "discover", "-r", p("rec.jsonl"), "--mode", "bots", "-o", p("rep.json")}).code == 0);
        REQUIRE(cli({"-q", "adjudicate", "--reports", p("rep.json"), "--kb-auto", "-o", p("find.json")}).code == 0);
        REQUIRE(cli({"-q", "compile", "-f", p("find.json"), "-o", p("rules.txt")}).code == 0);
        REQUIRE(cli({"-q", "detect", "--rules", p("rules.txt"), "-r", p("rec.jsonl"), "-o", p("dec.jsonl"),
                     "--state-out", p("state.json")})
                    .code == 0);
        REQUIRE(cli({"-q", "--format", "csv", "eval", "-d", p("dec.jsonl"), "-r", p("rec.jsonl"), "--split", "0.8",
                     "-o", p("report.csv")})
                    .code == 0);
    };
    pipeline("a-");
    pipeline("b-");
    for (const char* f : {"raw.jsonl", "rec.jsonl", "rep.json", "find.json", "rules.txt", "dec.jsonl", "state.json",
                          "report.csv"}) {
        INFO(f);
        CHECK(read_file(dir / (std::string("a-") + f)) == read_file(dir / (std::string("b-") + f)));
    }
    CHECK(read_file(dir / "a-report.csv").rfind("service,mode,", 0) == 0);

    // resuming from the saved state: the same records raise no temporal flags
    auto again = cli({"-q", "detect", "--rules", dir / "a-rules.txt", "-r", dir / "a-rec.jsonl", "--state-in",
                      dir / "a-state.json"});
    REQUIRE(again.code == 0);
    CHECK(again.out.find("\"temporal_flags\":[{") == std::string::npos);
    CHECK(read_file(dir / "a-dec.jsonl").find("\"temporal_flags\":[{") != std::string::npos);

    write_file(dir / "trunc.json", read_file(dir / "a-state.json").substr(0, 40));
    CHECK(cli({"-q", "detect", "-r", dir / "a-rec.jsonl", "--state-in", dir / "trunc.json"}).code == kExitData);
}

TEST_CASE("eval split rejects degenerate fractions") {
    TempDir dir;
    write_small_config(dir);
    REQUIRE(cli({"-q", "synth", "-c", dir / "synth.json", "-o", dir / "raw.jsonl"}).code == 0);
    REQUIRE(cli({"-q", "ingest", "-i", dir / "raw.jsonl", "-o", dir / "rec.jsonl"}).code == 0);
    REQUIRE(cli({"-q", "detect", "-r", dir / "rec.jsonl", "-o", dir / "dec.jsonl"}).code == 0);
    CHECK(cli({"-q", "eval", "-d", dir / "dec.jsonl", "-r", dir / "rec.jsonl", "--split", "1.0"}).code == kExitData);
    auto text = cli({"-q", "--format", "text", "eval", "-d", dir / "dec.jsonl", "-r", dir / "rec.jsonl"});
    CHECK(text.code == 0);
    CHECK(text.out.find("Combined") != std::string::npos);
}
