#include "arbiter/cli.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include "arbiter/agent.hpp"
#include "arbiter/annotator.hpp"
#include "arbiter/datasets.hpp"
#include "arbiter/digest.hpp"
#include "arbiter/harness.hpp"
#include "arbiter/prompts.hpp"
#include "arbiter/sandbox.hpp"
#include "arbiter/search.hpp"

namespace arbiter {

namespace {

namespace fs = std::filesystem;

// "mock:script.jsonl" or "http:https://host/v1/chat/completions".
BackendSpec parse_backend(const std::string& text, const std::string& cache_dir) {
    BackendSpec spec;
    if (text.rfind("mock:", 0) == 0) {
        spec.kind = BackendKind::ScriptedMock;
        spec.script_path = text.substr(5);
    } else if (text.rfind("http:", 0) == 0) {
        spec.kind = BackendKind::HttpChatApi;
        spec.endpoint = text.substr(5);
        spec.auth_env = "ARBITER_API_KEY";
    } else {
        throw error("backend must be mock:<script.jsonl> or http:<endpoint-url>, got '" + text +
                    "'");
    }
    if (!cache_dir.empty()) {
        spec.cache_mode = CacheMode::ReadWrite;
        spec.cache_dir = cache_dir;
    }
    spec.check();
    return spec;
}

std::shared_ptr<ChatBackend> make_backend(const BackendSpec& spec) {
    if (spec.kind == BackendKind::ScriptedMock)
        return ScriptedMockBackend::from_script_file(*spec.script_path);
    return std::make_shared<HttpChatBackend>(spec);
}

std::shared_ptr<SearchClient> make_search_client(const std::string& mode,
                                                 const std::string& fixtures,
                                                 const std::string& endpoint) {
    if (mode == "off") return std::make_shared<UnavailableSearchClient>();
    if (mode == "replay") {
        if (fixtures.empty()) throw error("--search-mode replay needs --fixtures");
        return std::make_shared<ReplaySearchClient>(fixtures);
    }
    LiveSearchConfig live;
    live.endpoint = endpoint;
    if (mode == "live") {
        if (endpoint.empty()) throw error("--search-mode live needs --search-endpoint");
        return std::make_shared<LiveSearchClient>(live);
    }
    if (mode == "record") {
        if (fixtures.empty() || endpoint.empty())
            throw error("--search-mode record needs --fixtures and --search-endpoint");
        return std::make_shared<RecordSearchClient>(std::make_shared<LiveSearchClient>(live),
                                                    fixtures);
    }
    throw error("unknown search mode '" + mode + "' (off|replay|record|live)");
}

std::string dataset_label(const std::string& path) {
    return fs::path(path).stem().string();
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path.string());
    out << text;
    if (!out) throw error("write failed for " + path.string());
}

// Shared wiring for annotate and fixtures record: both execute a full run and
// save the RunResult; they differ only in search/backend modes.
struct AnnotateOptions {
    std::string config_file;
    std::string dataset;
    std::string annotator = "baseline:pick-best";
    std::string backend;
    std::vector<std::int64_t> seeds{1, 2, 3, 4, 5};
    int max_parallel = 4;
    std::string order_policy = "as_given";
    std::string cache_dir;
    std::string search_mode = "off";
    std::string fixtures;
    std::string search_endpoint;
    std::string model_tag = "offline-mock";
    std::string prompts_dir;
    std::string out = "run_result.json";
};

void add_annotate_flags(CLI::App* cmd, AnnotateOptions& opt) {
    cmd->add_option("--config", opt.config_file,
                    "TOML file supplying default values for these flags");
    cmd->add_option("--dataset", opt.dataset, "pairwise JSONL dataset");
    cmd->add_option("--annotator", opt.annotator, "agent:<baseline> or baseline:<kind>");
    cmd->add_option("--backend", opt.backend, "mock:<script.jsonl> or http:<endpoint-url>");
    cmd->add_option("--seeds", opt.seeds, "seed list")->delimiter(',');
    cmd->add_option("--max-parallel", opt.max_parallel, "worker threads");
    cmd->add_option("--order-policy", opt.order_policy, "as_given or swap_ab");
    cmd->add_option("--cache-dir", opt.cache_dir, "response cache directory");
    cmd->add_option("--search-mode", opt.search_mode, "off|replay|record|live");
    cmd->add_option("--fixtures", opt.fixtures, "search fixture JSONL");
    cmd->add_option("--search-endpoint", opt.search_endpoint, "live search endpoint URL");
    cmd->add_option("--model-tag", opt.model_tag, "model identifier used in cache keys");
    cmd->add_option("--prompts-dir", opt.prompts_dir, "prompt template overrides (*.txt)");
    cmd->add_option("--out", opt.out, "RunResult output path");
}

std::vector<std::int64_t> parse_seed_list(const std::vector<std::string>& inputs) {
    std::vector<std::int64_t> seeds;
    for (const auto& input : inputs) {
        std::stringstream stream(input);
        std::string part;
        while (std::getline(stream, part, ',')) {
            if (part.empty()) continue;
            std::size_t used = 0;
            std::int64_t seed = std::stoll(part, &used);
            if (used != part.size()) throw error("bad seed '" + part + "'");
            seeds.push_back(seed);
        }
    }
    return seeds;
}

// Fills every option the command line left unset from a TOML file, so flags
// always override file values. Secrets never live in the file: backends name
// the environment variable holding their API key and read it at call time.
void apply_config_file(CLI::App* cmd, AnnotateOptions& opt) {
    std::ifstream in(opt.config_file);
    if (!in) throw error("cannot read config file: " + opt.config_file);
    CLI::ConfigTOML toml;
    std::vector<CLI::ConfigItem> items = toml.from_config(in);

    auto unset = [&](const std::string& flag) { return cmd->count(flag) == 0; };
    std::vector<std::string> unknown;
    for (const auto& item : items) {
        if (item.name == "++" || item.name == "--") continue;  // section markers
        std::string key = item.name;
        for (char& ch : key)
            if (ch == '_') ch = '-';
        const std::string value = item.inputs.empty() ? "" : item.inputs.front();
        if (!item.parents.empty()) {
            unknown.push_back(item.fullname());
        } else if (key == "dataset") {
            if (unset("--dataset")) opt.dataset = value;
        } else if (key == "annotator") {
            if (unset("--annotator")) opt.annotator = value;
        } else if (key == "backend") {
            if (unset("--backend")) opt.backend = value;
        } else if (key == "seeds") {
            if (unset("--seeds")) opt.seeds = parse_seed_list(item.inputs);
        } else if (key == "max-parallel") {
            if (unset("--max-parallel")) opt.max_parallel = std::stoi(value);
        } else if (key == "order-policy") {
            if (unset("--order-policy")) opt.order_policy = value;
        } else if (key == "cache-dir") {
            if (unset("--cache-dir")) opt.cache_dir = value;
        } else if (key == "search-mode") {
            if (unset("--search-mode")) opt.search_mode = value;
        } else if (key == "fixtures") {
            if (unset("--fixtures")) opt.fixtures = value;
        } else if (key == "search-endpoint") {
            if (unset("--search-endpoint")) opt.search_endpoint = value;
        } else if (key == "model-tag") {
            if (unset("--model-tag")) opt.model_tag = value;
        } else if (key == "prompts-dir") {
            if (unset("--prompts-dir")) opt.prompts_dir = value;
        } else if (key == "out") {
            if (unset("--out")) opt.out = value;
        } else {
            unknown.push_back(item.fullname());
        }
    }
    if (!unknown.empty()) {
        std::string msg = "unknown config key(s):";
        for (const auto& k : unknown) msg += " " + k;
        throw error(msg);
    }
}

int run_annotate(const AnnotateOptions& opt, std::ostream& out, std::ostream& err) {
    // Everything before run() is input validation and wiring: failures there are
    // usage errors (exit 1), not runtime failures (exit 2).
    std::string missing;
    if (opt.dataset.empty()) missing += " --dataset";
    if (opt.backend.empty()) missing += " --backend";
    if (!missing.empty()) {
        err << "missing required option(s):" << missing << "\n";
        return 1;
    }
    std::vector<DatasetItem> dataset;
    std::shared_ptr<ChatBackend> backend;
    std::unique_ptr<LlmGateway> gateway;
    PromptStore prompts = PromptStore::builtin();
    AnnotatorSpec annotator_spec;
    std::shared_ptr<SearchClient> search;
    std::unique_ptr<ExecSandbox> sandbox;
    ToolRegistry registry;
    AnnotatorFn annotate;
    RunConfig config;
    try {
        dataset = load_pairwise(opt.dataset);
        BackendSpec spec = parse_backend(opt.backend, opt.cache_dir);
        backend = make_backend(spec);
        gateway = std::make_unique<LlmGateway>(backend, spec);
        if (!opt.prompts_dir.empty()) prompts.load_directory(opt.prompts_dir);
        annotator_spec = parse_annotator_spec(opt.annotator);

        config.seeds = opt.seeds;
        config.annotator_id = annotator_spec.to_string();
        config.backend_id = opt.backend;
        config.max_parallel = opt.max_parallel;
        config.order_policy = order_policy_from_string(opt.order_policy);
        config.validate();
    } catch (const error& e) {
        err << e.what() << "\n";
        return 1;
    }
    if (!opt.cache_dir.empty()) out << "cache directory: " << opt.cache_dir << "\n";

    AnnotatorEnv env;
    env.gateway = gateway.get();
    env.prompts = &prompts;
    env.model_tag = opt.model_tag;
    if (annotator_spec.is_agent) {
        try {
            search = make_search_client(opt.search_mode, opt.fixtures, opt.search_endpoint);
        } catch (const error& e) {
            err << e.what() << "\n";
            return 1;
        }
        sandbox = std::make_unique<ExecSandbox>();
        registry = make_default_registry(env, search.get(), sandbox.get());
    }
    annotate = make_annotator(annotator_spec, env, &registry);

    RunResult result = run(dataset, annotate, config);
    result.dataset_digest = dataset_digest(dataset);
    for (const auto& id : prompts.ids()) result.prompt_digests[id] = sha256_hex(prompts.get(id));
    save_run_result(opt.out, result);
    out << "wrote " << opt.out << " (" << result.outcomes.size() << " outcomes)\n";
    return 0;
}

struct ScoredRun {
    std::string run_path;
    ReportRow row;
};

ReportRow score_one(const std::string& run_path, const std::vector<DatasetItem>& dataset,
                    const std::string& dataset_path, TiePolicy tie_policy) {
    RunResult result = load_run_result(run_path);
    std::string digest = dataset_digest(dataset);
    if (!result.dataset_digest.empty() && result.dataset_digest != digest)
        throw error(run_path + ": dataset digest mismatch (run was produced from a different " +
                    "dataset than " + dataset_path + ")");
    ReportRow row;
    row.dataset = dataset_label(dataset_path);
    row.annotator = result.config.annotator_id;
    row.stats = compute_agreement(result, dataset, tie_policy);
    return row;
}

int emit_reports(const std::vector<ReportRow>& rows, const std::string& report_dir,
                 std::ostream& out) {
    std::string csv = render_report_csv(rows);
    std::string md = render_report_markdown(rows);
    if (!report_dir.empty()) {
        fs::create_directories(report_dir);
        write_text_file(fs::path(report_dir) / "report.csv", csv);
        write_text_file(fs::path(report_dir) / "report.md", md);
        out << "wrote " << (fs::path(report_dir) / "report.csv").string() << " and "
            << (fs::path(report_dir) / "report.md").string() << "\n";
    }
    out << md;
    return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"pairwise preference annotation engine"};
    app.require_subcommand(1);

    AnnotateOptions annotate_opt;
    CLI::App* annotate_cmd =
        app.add_subcommand("annotate", "run an annotator over a dataset, write a RunResult");
    add_annotate_flags(annotate_cmd, annotate_opt);

    // score
    struct {
        std::vector<std::string> runs;
        std::string dataset;
        std::string tie_policy = "wrong";
        std::string report_dir;
    } score_opt;
    CLI::App* score_cmd = app.add_subcommand("score", "compute agreement for a RunResult");
    score_cmd->add_option("--run", score_opt.runs, "RunResult JSON path")->required();
    score_cmd->add_option("--dataset", score_opt.dataset, "dataset the run was produced from")
        ->required();
    score_cmd->add_option("--tie-policy", score_opt.tie_policy, "wrong or half");
    score_cmd->add_option("--report-dir", score_opt.report_dir, "directory for CSV/markdown");

    // compare shares score's shape but requires ≥2 runs
    decltype(score_opt) compare_opt;
    CLI::App* compare_cmd = app.add_subcommand("compare", "score several RunResults side by side");
    compare_cmd->add_option("--run", compare_opt.runs, "RunResult JSON paths")
        ->required()
        ->expected(2, -1);
    compare_cmd->add_option("--dataset", compare_opt.dataset, "dataset the runs share")
        ->required();
    compare_cmd->add_option("--tie-policy", compare_opt.tie_policy, "wrong or half");
    compare_cmd->add_option("--report-dir", compare_opt.report_dir, "directory for CSV/markdown");

    // dataset validate|build|convert
    CLI::App* dataset_cmd = app.add_subcommand("dataset", "dataset utilities");
    dataset_cmd->require_subcommand(1);

    std::string validate_path;
    CLI::App* validate_cmd = dataset_cmd->add_subcommand("validate", "check a pairwise JSONL file");
    validate_cmd->add_option("path", validate_path, "dataset path")->required();

    struct {
        std::string pools;
        std::int64_t seed = 1;
        std::string subset_tag;
        std::string out = "pairs.jsonl";
    } build_opt;
    CLI::App* build_cmd =
        dataset_cmd->add_subcommand("build", "build pairs from labeled solution pools");
    build_cmd->add_option("--pools", build_opt.pools, "solution-pool JSONL")->required();
    build_cmd->add_option("--seed", build_opt.seed, "pairing seed");
    build_cmd->add_option("--subset-tag", build_opt.subset_tag, "subset_tag for built items");
    build_cmd->add_option("--out", build_opt.out, "output dataset path");

    struct {
        std::string format;
        std::string input;
        std::string gold;
        std::string failures;
        std::int64_t seed = 1;
        std::string subset_tag;
        std::string out = "converted.jsonl";
    } convert_opt;
    CLI::App* convert_cmd =
        dataset_cmd->add_subcommand("convert", "convert external formats to pairwise JSONL");
    convert_cmd
        ->add_option("--format", convert_opt.format,
                     "preference-pairs (chosen/rejected JSONL) or graded-failures (gold + "
                     "failures JSONL)")
        ->required();
    convert_cmd->add_option("--in", convert_opt.input, "input for preference-pairs");
    convert_cmd->add_option("--gold", convert_opt.gold, "gold answers for graded-failures");
    convert_cmd->add_option("--failures", convert_opt.failures,
                            "model failures for graded-failures");
    convert_cmd->add_option("--seed", convert_opt.seed, "slot-randomization seed");
    convert_cmd->add_option("--subset-tag", convert_opt.subset_tag, "subset_tag for items");
    convert_cmd->add_option("--out", convert_opt.out, "output dataset path");

    // fixtures record: a full annotate run with record-mode search
    AnnotateOptions record_opt;
    CLI::App* fixtures_cmd = app.add_subcommand("fixtures", "fixture utilities");
    fixtures_cmd->require_subcommand(1);
    CLI::App* record_cmd = fixtures_cmd->add_subcommand(
        "record", "run live and mint replayable search fixtures");
    add_annotate_flags(record_cmd, record_opt);
    record_opt.search_mode = "record";

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {  // --help
            out << app.help();
            return 0;
        }
        err << e.what() << "\n" << app.help();
        return 1;
    }

    try {
        if (*annotate_cmd && !annotate_opt.config_file.empty())
            apply_config_file(annotate_cmd, annotate_opt);
        if (*record_cmd && !record_opt.config_file.empty())
            apply_config_file(record_cmd, record_opt);
    } catch (const error& e) {
        err << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "bad config file: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*annotate_cmd) return run_annotate(annotate_opt, out, err);
        if (*record_cmd) {
            if (record_opt.search_mode != "record") {
                err << "fixtures record always uses --search-mode record\n";
                return 1;
            }
            return run_annotate(record_opt, out, err);
        }
        if (*score_cmd || *compare_cmd) {
            const auto& opt = *score_cmd ? score_opt : compare_opt;
            // Loading and cross-checking the declared inputs is validation.
            std::vector<ReportRow> rows;
            try {
                std::vector<DatasetItem> dataset = load_pairwise(opt.dataset);
                TiePolicy tie_policy = tie_policy_from_string(opt.tie_policy);
                for (const auto& run_path : opt.runs)
                    rows.push_back(score_one(run_path, dataset, opt.dataset, tie_policy));
            } catch (const error& e) {
                err << e.what() << "\n";
                return 1;
            }
            return emit_reports(rows, opt.report_dir, out);
        }
        if (*validate_cmd) {
            try {
                std::vector<DatasetItem> items = load_pairwise(validate_path);
                out << validate_path << ": " << items.size() << " items, digest "
                    << dataset_digest(items) << "\n";
                return 0;
            } catch (const error& e) {
                err << e.what() << "\n";
                return 1;
            }
        }
        if (*build_cmd) {
            BuildOutcome built = build_pairs(load_solution_pools(build_opt.pools), build_opt.seed,
                                             build_opt.subset_tag);
            for (const auto& w : built.warnings) err << "warning: " << w << "\n";
            write_pairwise(build_opt.out, built.items);
            out << "wrote " << build_opt.out << " (" << built.items.size() << " items)\n";
            return 0;
        }
        if (*convert_cmd) {
            BuildOutcome built;
            if (convert_opt.format == "preference-pairs") {
                if (convert_opt.input.empty()) throw error("preference-pairs needs --in");
                built = convert_preference_pairs(convert_opt.input, convert_opt.seed);
                if (!convert_opt.subset_tag.empty())
                    for (auto& item : built.items) item.subset_tag = convert_opt.subset_tag;
            } else if (convert_opt.format == "graded-failures") {
                if (convert_opt.gold.empty() || convert_opt.failures.empty())
                    throw error("graded-failures needs --gold and --failures");
                built = convert_graded_failures(convert_opt.gold, convert_opt.failures,
                                                convert_opt.seed, convert_opt.subset_tag);
            } else {
                throw error("unknown format '" + convert_opt.format +
                            "' (preference-pairs|graded-failures)");
            }
            for (const auto& w : built.warnings) err << "warning: " << w << "\n";
            write_pairwise(convert_opt.out, built.items);
            out << "wrote " << convert_opt.out << " (" << built.items.size() << " items)\n";
            return 0;
        }
        err << "no subcommand selected\n" << app.help();
        return 1;
    } catch (const error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace arbiter
