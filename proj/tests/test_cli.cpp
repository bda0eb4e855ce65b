#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "arbiter/cli.hpp"
#include "arbiter/core.hpp"
#include "arbiter/harness.hpp"

using namespace arbiter;
namespace fs = std::filesystem;

namespace {

struct CliWorkspace {
    fs::path dir;

    CliWorkspace() {
        dir = fs::temp_directory_path() /
              ("arbiter-cli-" + std::to_string(::getpid()) + "-" +
               std::to_string(counter()++));
        fs::create_directories(dir);
    }
    ~CliWorkspace() { fs::remove_all(dir); }

    static int& counter() {
        static int n = 0;
        return n;
    }

    std::string write(const std::string& name, const std::string& text) const {
        fs::path path = dir / name;
        std::ofstream out(path);
        out << text;
        return path.string();
    }

    std::string path(const std::string& name) const { return (dir / name).string(); }
};

std::string two_item_dataset() {
    return R"({"id":"q1","prompt":"capital of France?","text_a":"Paris","text_b":"Lyon","gold":"a"})"
           "\n"
           R"({"id":"q2","prompt":"capital of Italy?","text_a":"Turin","text_b":"Rome","gold":"b"})"
           "\n";
}

// One catch-all entry: every pick-best call selects text_a.
std::string pick_a_script() {
    return R"({"matcher":"Select the better of the following two texts.","response":{"reasoning":"scripted","selected_text":"text_a"}})"
           "\n";
}

struct CliRun {
    int code = 0;
    std::string out;
    std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv{"arbiter"};
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliRun run;
    run.code = dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
    run.out = out.str();
    run.err = err.str();
    return run;
}

}  // namespace

TEST_CASE("annotate writes a run result") {
    CliWorkspace ws;
    std::string dataset = ws.write("pairs.jsonl", two_item_dataset());
    std::string script = ws.write("script.jsonl", pick_a_script());
    std::string out_path = ws.path("run.json");

    CliRun run = cli({"annotate", "--dataset", dataset, "--backend", "mock:" + script,
                      "--seeds", "1,2", "--out", out_path});
    CAPTURE(run.err);
    REQUIRE(run.code == 0);
    CHECK(run.out.find("wrote " + out_path) != std::string::npos);

    RunResult result = load_run_result(out_path);
    REQUIRE(result.outcomes.size() == 4);  // 2 seeds x 2 items
    for (const auto& [seed, id, outcome] : result.outcomes) {
        (void)seed;
        (void)id;
        CHECK(outcome.label == PreferenceLabel::PreferA);
        CHECK(outcome.source == OutcomeSource::Baseline);
    }
    CHECK(result.config.annotator_id == "baseline:pick-best");
    CHECK(!result.dataset_digest.empty());
    CHECK(result.prompt_digests.count("pick_best") == 1);
}

TEST_CASE("annotate flag values can come from a config file, flags win") {
    CliWorkspace ws;
    std::string dataset = ws.write("pairs.jsonl", two_item_dataset());
    std::string script = ws.write("script.jsonl", pick_a_script());
    std::string config = ws.write("run.toml", "dataset = \"" + dataset +
                                                  "\"\n"
                                                  "backend = \"mock:" +
                                                  script +
                                                  "\"\n"
                                                  "seeds = \"7\"\n"
                                                  "out = \"" +
                                                  ws.path("from-config.json") + "\"\n");

    SUBCASE("config file alone supplies required flags") {
        CliRun run = cli({"annotate", "--config", config});
        CAPTURE(run.err);
        REQUIRE(run.code == 0);
        RunResult result = load_run_result(ws.path("from-config.json"));
        CHECK(result.outcomes.size() == 2);
        CHECK(result.config.seeds == std::vector<std::int64_t>{7});
    }
    SUBCASE("a command-line flag overrides the file value") {
        std::string override_path = ws.path("override.json");
        CliRun run = cli({"annotate", "--config", config, "--out", override_path});
        CAPTURE(run.err);
        REQUIRE(run.code == 0);
        CHECK(fs::exists(override_path));
        CHECK(!fs::exists(ws.path("from-config.json")));
    }
}

TEST_CASE("annotate reports all missing required options at once") {
    CliRun run = cli({"annotate"});
    CHECK(run.code == 1);
    CHECK(run.err.find("--dataset") != std::string::npos);
    CHECK(run.err.find("--backend") != std::string::npos);
}

TEST_CASE("annotate usage errors exit 1") {
    CliWorkspace ws;
    std::string dataset = ws.write("pairs.jsonl", two_item_dataset());
    std::string script = ws.write("script.jsonl", pick_a_script());

    SUBCASE("malformed backend spec") {
        CliRun run = cli({"annotate", "--dataset", dataset, "--backend", "carrier-pigeon"});
        CHECK(run.code == 1);
        CHECK(run.err.find("mock:<script.jsonl>") != std::string::npos);
    }
    SUBCASE("unknown annotator") {
        CliRun run = cli({"annotate", "--dataset", dataset, "--backend", "mock:" + script,
                          "--annotator", "judge:vibes"});
        CHECK(run.code == 1);
    }
    SUBCASE("agent with replay search but no fixtures") {
        CliRun run = cli({"annotate", "--dataset", dataset, "--backend", "mock:" + script,
                          "--annotator", "agent:pick-best", "--search-mode", "replay"});
        CHECK(run.code == 1);
        CHECK(run.err.find("--fixtures") != std::string::npos);
    }
    SUBCASE("missing dataset file") {
        CliRun run = cli({"annotate", "--dataset", ws.path("nope.jsonl"), "--backend",
                          "mock:" + script});
        CHECK(run.code == 1);
    }
    SUBCASE("duplicate seeds rejected by config validation") {
        CliRun run = cli({"annotate", "--dataset", dataset, "--backend", "mock:" + script,
                          "--seeds", "3,3"});
        CHECK(run.code == 1);
    }
}

TEST_CASE("annotate prints the cache directory it uses") {
    CliWorkspace ws;
    std::string dataset = ws.write("pairs.jsonl", two_item_dataset());
    std::string script = ws.write("script.jsonl", pick_a_script());
    std::string cache = ws.path("cache");

    CliRun run = cli({"annotate", "--dataset", dataset, "--backend", "mock:" + script,
                      "--seeds", "1", "--out", ws.path("run.json"), "--cache-dir", cache});
    CAPTURE(run.err);
    REQUIRE(run.code == 0);
    CHECK(run.out.find("cache directory: " + cache) != std::string::npos);
    CHECK(fs::is_directory(cache));
    CHECK(!fs::is_empty(cache));
}

TEST_CASE("score renders agreement reports") {
    CliWorkspace ws;
    std::string dataset = ws.write("pairs.jsonl", two_item_dataset());
    std::string script = ws.write("script.jsonl", pick_a_script());
    std::string run_path = ws.path("run.json");
    REQUIRE(cli({"annotate", "--dataset", dataset, "--backend", "mock:" + script, "--seeds",
                 "1,2", "--out", run_path})
                .code == 0);

    SUBCASE("stdout markdown plus report files") {
        std::string report_dir = ws.path("reports");
        CliRun run = cli(
            {"score", "--run", run_path, "--dataset", dataset, "--report-dir", report_dir});
        CAPTURE(run.err);
        REQUIRE(run.code == 0);
        // always-A against gold {a, b} is half right, on both seeds
        CHECK(run.out.find("| pairs | baseline:pick-best | 0.5000 | 0.0000 |") !=
              std::string::npos);
        CHECK(fs::exists(fs::path(report_dir) / "report.csv"));
        CHECK(fs::exists(fs::path(report_dir) / "report.md"));
        std::ifstream csv(fs::path(report_dir) / "report.csv");
        std::string header;
        std::getline(csv, header);
        CHECK(header == "dataset,annotator,mean,std,tie_rate,not_available_rate,revert_rate");
    }
    SUBCASE("dataset digest mismatch is a validation error") {
        std::string other = ws.write(
            "other.jsonl",
            R"({"id":"q9","prompt":"p","text_a":"x","text_b":"y","gold":"a"})" "\n");
        CliRun run = cli({"score", "--run", run_path, "--dataset", other});
        CHECK(run.code == 1);
        CHECK(run.err.find("digest mismatch") != std::string::npos);
    }
    SUBCASE("compare requires at least two runs") {
        CliRun run = cli({"compare", "--run", run_path, "--dataset", dataset});
        CHECK(run.code == 1);
    }
    SUBCASE("compare emits one row per run") {
        std::string second = ws.path("run2.json");
        REQUIRE(cli({"annotate", "--dataset", dataset, "--backend", "mock:" + script,
                     "--seeds", "5", "--out", second})
                    .code == 0);
        CliRun run = cli({"compare", "--run", run_path, "--run", second, "--dataset", dataset,
                          "--tie-policy", "half"});
        CAPTURE(run.err);
        REQUIRE(run.code == 0);
        std::size_t first_row = run.out.find("| pairs | baseline:pick-best |");
        REQUIRE(first_row != std::string::npos);
        CHECK(run.out.find("| pairs | baseline:pick-best |", first_row + 1) !=
              std::string::npos);
    }
}

TEST_CASE("dataset validate") {
    CliWorkspace ws;
    SUBCASE("clean file prints size and digest") {
        std::string dataset = ws.write("pairs.jsonl", two_item_dataset());
        CliRun run = cli({"dataset", "validate", dataset});
        REQUIRE(run.code == 0);
        CHECK(run.out.find("2 items, digest ") != std::string::npos);
    }
    SUBCASE("duplicate ids exit 1 with the offending line") {
        std::string bad = ws.write(
            "bad.jsonl",
            R"({"id":"q1","prompt":"p","text_a":"x","text_b":"y","gold":"a"})" "\n"
            R"({"id":"q1","prompt":"p","text_a":"x","text_b":"y","gold":"b"})" "\n");
        CliRun run = cli({"dataset", "validate", bad});
        CHECK(run.code == 1);
        CHECK(run.err.find("line 2") != std::string::npos);
    }
}

TEST_CASE("dataset build and convert") {
    CliWorkspace ws;
    SUBCASE("build pairs from solution pools") {
        std::string pools = ws.write(
            "pools.jsonl",
            R"({"problem_id":"p1","prompt":"sum 2 2","correct_solutions":["4"],"incorrect_solutions":["5"]})" "\n");
        std::string out_path = ws.path("built.jsonl");
        CliRun run = cli({"dataset", "build", "--pools", pools, "--seed", "3", "--subset-tag",
                          "arith", "--out", out_path});
        CAPTURE(run.err);
        REQUIRE(run.code == 0);
        CliRun check = cli({"dataset", "validate", out_path});
        CHECK(check.code == 0);
        CHECK(check.out.find("1 items") != std::string::npos);
    }
    SUBCASE("convert preference pairs") {
        std::string raw = ws.write(
            "prefs.jsonl",
            R"({"prompt":"say hi","chosen":"hi there","rejected":"go away"})" "\n");
        std::string out_path = ws.path("converted.jsonl");
        CliRun run = cli({"dataset", "convert", "--format", "preference-pairs", "--in", raw,
                          "--out", out_path});
        CAPTURE(run.err);
        REQUIRE(run.code == 0);
        CHECK(cli({"dataset", "validate", out_path}).code == 0);
    }
    SUBCASE("convert graded failures joins on id") {
        std::string gold = ws.write(
            "gold.jsonl",
            R"({"id":"g1","question":"2+2?","answer":"4"})" "\n");
        std::string failures = ws.write("failures.jsonl",
                                        R"({"id":"g1","answer":"22"})" "\n");
        std::string out_path = ws.path("graded.jsonl");
        CliRun run = cli({"dataset", "convert", "--format", "graded-failures", "--gold", gold,
                          "--failures", failures, "--out", out_path});
        CAPTURE(run.err);
        REQUIRE(run.code == 0);
        CHECK(cli({"dataset", "validate", out_path}).code == 0);
    }
    SUBCASE("unknown format exits 2 as a runtime failure") {
        CliRun run = cli({"dataset", "convert", "--format", "csv"});
        CHECK(run.code == 2);
        CHECK(run.err.find("unknown format") != std::string::npos);
    }
}

TEST_CASE("usage and help") {
    SUBCASE("unknown subcommand") {
        CliRun run = cli({"frobnicate"});
        CHECK(run.code == 1);
        CHECK(!run.err.empty());
    }
    SUBCASE("unknown flag") {
        CliRun run = cli({"score", "--nonsense"});
        CHECK(run.code == 1);
    }
    SUBCASE("--help exits 0 and lists subcommands") {
        CliRun run = cli({"--help"});
        CHECK(run.code == 0);
        for (const char* name : {"annotate", "score", "compare", "dataset", "fixtures"})
            CHECK(run.out.find(name) != std::string::npos);
    }
    SUBCASE("fixtures record validates its search wiring") {
        CliWorkspace ws;
        std::string dataset = ws.write("pairs.jsonl", two_item_dataset());
        std::string script = ws.write("script.jsonl", pick_a_script());
        CliRun run = cli({"fixtures", "record", "--dataset", dataset, "--backend",
                          "mock:" + script, "--annotator", "agent:pick-best"});
        CHECK(run.code == 1);
        CHECK(run.err.find("--search-endpoint") != std::string::npos);
    }
}

TEST_CASE("agent annotator runs end-to-end over the CLI") {
    CliWorkspace ws;
    std::string dataset = ws.write(
        "pairs.jsonl",
        R"({"id":"q1","prompt":"capital of France?","text_a":"Paris","text_b":"Lyon","gold":"a"})"
        "\n");
    // Every tool's side assessment says "not useful", so the agent reverts to
    // pick-best deterministically; the baseline entry then decides.
    std::string assessment =
        R"({"matcher":"Assess the following text:","response":{)"
        R"("contains_facts":false,"is_like_wiki":false,"is_maths":false,)"
        R"("is_wordcount":false,"confidence_websearch_will_help":1,)"
        R"("code_useful":false,"math_question":false}})";
    std::string final_pick =
        R"({"matcher":"Select the better of the following two texts.",)"
        R"("response":{"reasoning":"scripted","selected_text":"text_b"}})";
    std::string script = ws.write("script.jsonl", assessment + "\n" + final_pick + "\n");
    std::string out_path = ws.path("agent-run.json");

    CliRun run = cli({"annotate", "--dataset", dataset, "--backend", "mock:" + script,
                      "--annotator", "agent:pick-best", "--seeds", "1", "--out", out_path});
    CAPTURE(run.err);
    REQUIRE(run.code == 0);
    RunResult result = load_run_result(out_path);
    REQUIRE(result.outcomes.size() == 1);
    const PreferenceOutcome& outcome = std::get<2>(result.outcomes[0]);
    CHECK(outcome.label == PreferenceLabel::PreferB);
    CHECK(outcome.source == OutcomeSource::RevertedToBaseline);
    CHECK(result.config.annotator_id == "agent:pick-best");
}
