#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <mutex>

#include "arbiter/digest.hpp"
#include "arbiter/harness.hpp"

using namespace arbiter;
namespace fs = std::filesystem;

namespace {

DatasetItem item(const std::string& id, PreferenceLabel gold) {
    DatasetItem it;
    it.task = {id, "prompt " + id, "first answer", "second answer"};
    it.gold = gold;
    return it;
}

RunConfig config_for(std::vector<std::int64_t> seeds, int parallel = 1,
                     OrderPolicy order = OrderPolicy::AsGiven) {
    RunConfig config;
    config.seeds = std::move(seeds);
    config.annotator_id = "baseline:pick-best";
    config.backend_id = "mock:unused";
    config.max_parallel = parallel;
    config.order_policy = order;
    return config;
}

PreferenceOutcome labeled(PreferenceLabel label,
                          OutcomeSource source = OutcomeSource::Baseline) {
    PreferenceOutcome out;
    out.label = label;
    out.source = source;
    out.reasoning = "scripted";
    return out;
}

// Independent recount: linear scans over the outcome list, no grid map, no
// shared helpers beyond the types. Used to cross-check compute_agreement.
AgreementStats recount_oracle(const RunResult& result, const std::vector<DatasetItem>& dataset,
                              TiePolicy tie_policy) {
    std::vector<std::int64_t> seeds;
    for (const auto& [seed, id, outcome] : result.outcomes) {
        (void)id;
        (void)outcome;
        bool known = false;
        for (std::int64_t s : seeds) known = known || s == seed;
        if (!known) seeds.push_back(seed);
    }

    AgreementStats stats;
    double ties = 0, not_avail = 0, reverted = 0;
    for (std::int64_t seed : seeds) {
        double credit = 0;
        for (const auto& it : dataset) {
            PreferenceLabel gold = it.gold;
            if (result.config.order_policy == OrderPolicy::SwapAB)
                gold = gold == PreferenceLabel::PreferA ? PreferenceLabel::PreferB
                                                        : PreferenceLabel::PreferA;
            for (const auto& [s, id, outcome] : result.outcomes) {
                if (s != seed || id != it.task.id) continue;
                if (outcome.label == gold) credit += 1;
                else if (outcome.label == PreferenceLabel::Tie &&
                         tie_policy == TiePolicy::TieHalfCredit)
                    credit += 0.5;
                if (outcome.label == PreferenceLabel::Tie) ties += 1;
                if (outcome.label == PreferenceLabel::NotAvailable) not_avail += 1;
                if (outcome.source == OutcomeSource::RevertedToBaseline) reverted += 1;
            }
        }
        stats.per_seed_agreement.push_back(credit / static_cast<double>(dataset.size()));
    }
    for (double a : stats.per_seed_agreement) stats.mean_agreement += a;
    stats.mean_agreement /= static_cast<double>(stats.per_seed_agreement.size());
    double var = 0;
    for (double a : stats.per_seed_agreement) var += (a - stats.mean_agreement) * (a - stats.mean_agreement);
    stats.std_dev = std::sqrt(var / static_cast<double>(stats.per_seed_agreement.size()));
    double cells = static_cast<double>(dataset.size() * seeds.size());
    stats.tie_rate = ties / cells;
    stats.not_available_rate = not_avail / cells;
    stats.revert_rate = reverted / cells;
    return stats;
}

void check_close(const AgreementStats& a, const AgreementStats& b) {
    CHECK(a.mean_agreement == doctest::Approx(b.mean_agreement).epsilon(1e-12));
    CHECK(a.std_dev == doctest::Approx(b.std_dev).epsilon(1e-12));
    CHECK(a.tie_rate == doctest::Approx(b.tie_rate).epsilon(1e-12));
    CHECK(a.not_available_rate == doctest::Approx(b.not_available_rate).epsilon(1e-12));
    CHECK(a.revert_rate == doctest::Approx(b.revert_rate).epsilon(1e-12));
    REQUIRE(a.per_seed_agreement.size() == b.per_seed_agreement.size());
    for (std::size_t i = 0; i < a.per_seed_agreement.size(); ++i)
        CHECK(a.per_seed_agreement[i] ==
              doctest::Approx(b.per_seed_agreement[i]).epsilon(1e-12));
}

}  // namespace

TEST_CASE("run covers the full grid in (seed, item) order") {
    std::vector<DatasetItem> dataset{item("c", PreferenceLabel::PreferA),
                                     item("a", PreferenceLabel::PreferB),
                                     item("b", PreferenceLabel::PreferA)};
    AnnotatorFn annotate = [](const PairwiseTask&, std::int64_t) {
        return labeled(PreferenceLabel::PreferA);
    };
    RunResult result = run(dataset, annotate, config_for({2, 1}));
    REQUIRE(result.outcomes.size() == 6);
    std::vector<std::pair<std::int64_t, std::string>> order;
    for (const auto& [seed, id, outcome] : result.outcomes) {
        (void)outcome;
        order.emplace_back(seed, id);
    }
    std::vector<std::pair<std::int64_t, std::string>> expected{
        {1, "a"}, {1, "b"}, {1, "c"}, {2, "a"}, {2, "b"}, {2, "c"}};
    CHECK(order == expected);
}

TEST_CASE("scheduling does not leak into results") {
    std::vector<DatasetItem> dataset;
    for (int i = 0; i < 23; ++i)
        dataset.push_back(item("it-" + std::to_string(i),
                               i % 2 ? PreferenceLabel::PreferA : PreferenceLabel::PreferB));
    AnnotatorFn annotate = [](const PairwiseTask& task, std::int64_t seed) {
        return labeled(keyed_unit_draw(seed, task.id) < 0.5 ? PreferenceLabel::PreferA
                                                            : PreferenceLabel::PreferB);
    };
    RunResult serial = run(dataset, annotate, config_for({1, 2, 3}, 1));
    RunResult parallel = run(dataset, annotate, config_for({1, 2, 3}, 8));
    CHECK(serial.outcomes == parallel.outcomes);
}

TEST_CASE("an annotator exception becomes a NotAvailable outcome") {
    std::vector<DatasetItem> dataset{item("ok", PreferenceLabel::PreferA),
                                     item("boom", PreferenceLabel::PreferA)};
    AnnotatorFn annotate = [](const PairwiseTask& task, std::int64_t) {
        if (task.id == "boom") throw error("backend offline");
        return labeled(PreferenceLabel::PreferA);
    };
    RunResult result = run(dataset, annotate, config_for({1}));
    REQUIRE(result.outcomes.size() == 2);
    const PreferenceOutcome& failed = std::get<2>(result.outcomes[0]);
    CHECK(std::get<1>(result.outcomes[0]) == "boom");
    CHECK(failed.label == PreferenceLabel::NotAvailable);
    CHECK(failed.reasoning == "annotation failed: backend offline");
    CHECK(std::get<2>(result.outcomes[1]).label == PreferenceLabel::PreferA);
}

TEST_CASE("swap policy swaps the texts the annotator sees and inverts gold") {
    std::vector<DatasetItem> dataset{item("x", PreferenceLabel::PreferA),
                                     item("y", PreferenceLabel::PreferB),
                                     item("z", PreferenceLabel::PreferB)};
    std::vector<std::string> seen_text_a;
    std::mutex mutex;
    AnnotatorFn always_a = [&](const PairwiseTask& task, std::int64_t) {
        std::lock_guard<std::mutex> lock(mutex);
        seen_text_a.push_back(task.text_a);
        return labeled(PreferenceLabel::PreferA);
    };
    RunConfig config = config_for({1}, 1, OrderPolicy::SwapAB);
    RunResult result = run(dataset, always_a, config);
    // the annotator saw the original text_b in slot a
    CHECK(seen_text_a == std::vector<std::string>(3, "second answer"));

    // always-A under swap matches exactly the items whose original gold is B
    AgreementStats stats = compute_agreement(result, dataset, TiePolicy::TieCountsWrong);
    CHECK(stats.mean_agreement == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("agreement worked examples") {
    std::vector<DatasetItem> dataset{item("1", PreferenceLabel::PreferA),
                                     item("2", PreferenceLabel::PreferA),
                                     item("3", PreferenceLabel::PreferB)};
    RunResult result;
    result.config = config_for({1});

    SUBCASE("two of three match") {
        result.outcomes = {{1, "1", labeled(PreferenceLabel::PreferA)},
                           {1, "2", labeled(PreferenceLabel::PreferB)},
                           {1, "3", labeled(PreferenceLabel::PreferB)}};
        AgreementStats stats = compute_agreement(result, dataset, TiePolicy::TieCountsWrong);
        CHECK(stats.mean_agreement == doctest::Approx(2.0 / 3.0));
        CHECK(stats.std_dev == 0.0);
        CHECK(stats.tie_rate == 0.0);
    }
    SUBCASE("a tie under half credit") {
        result.outcomes = {{1, "1", labeled(PreferenceLabel::PreferA)},
                           {1, "2", labeled(PreferenceLabel::Tie)},
                           {1, "3", labeled(PreferenceLabel::PreferB)}};
        CHECK(compute_agreement(result, dataset, TiePolicy::TieHalfCredit).mean_agreement ==
              doctest::Approx(5.0 / 6.0));
        AgreementStats wrong = compute_agreement(result, dataset, TiePolicy::TieCountsWrong);
        CHECK(wrong.mean_agreement == doctest::Approx(2.0 / 3.0));
        CHECK(wrong.tie_rate == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("all NotAvailable scores zero") {
        result.outcomes = {{1, "1", labeled(PreferenceLabel::NotAvailable)},
                           {1, "2", labeled(PreferenceLabel::NotAvailable)},
                           {1, "3", labeled(PreferenceLabel::NotAvailable)}};
        AgreementStats stats = compute_agreement(result, dataset, TiePolicy::TieCountsWrong);
        CHECK(stats.mean_agreement == 0.0);
        CHECK(stats.not_available_rate == 1.0);
    }
    SUBCASE("missing cell raises IncompleteGrid") {
        result.outcomes = {{1, "1", labeled(PreferenceLabel::PreferA)},
                           {1, "3", labeled(PreferenceLabel::PreferB)}};
        CHECK_THROWS_AS(compute_agreement(result, dataset, TiePolicy::TieCountsWrong),
                        incomplete_grid_error);
    }
}

TEST_CASE("random labels agree about half the time") {
    std::vector<DatasetItem> dataset;
    SplitMix64 rng(99);
    for (int i = 0; i < 10000; ++i)
        dataset.push_back(item("r-" + std::to_string(i), rng.next_unit() < 0.5
                                                             ? PreferenceLabel::PreferA
                                                             : PreferenceLabel::PreferB));
    RunResult result;
    result.config = config_for({1});
    for (const auto& it : dataset)
        result.outcomes.emplace_back(
            1, it.task.id,
            labeled(rng.next_unit() < 0.5 ? PreferenceLabel::PreferA : PreferenceLabel::PreferB));
    AgreementStats stats = compute_agreement(result, dataset, TiePolicy::TieCountsWrong);
    CHECK(stats.mean_agreement > 0.48);
    CHECK(stats.mean_agreement < 0.52);
}

TEST_CASE("agreement matches a brute-force recount on randomized grids") {
    SplitMix64 rng(2024);
    for (int round = 0; round < 200; ++round) {
        int items = 1 + static_cast<int>(rng.next() % 7);
        int seed_count = 1 + static_cast<int>(rng.next() % 3);
        bool swap = rng.next_unit() < 0.25;

        std::vector<DatasetItem> dataset;
        for (int i = 0; i < items; ++i)
            dataset.push_back(item("i" + std::to_string(i), rng.next_unit() < 0.5
                                                                ? PreferenceLabel::PreferA
                                                                : PreferenceLabel::PreferB));
        RunResult result;
        std::vector<std::int64_t> seeds;
        for (int s = 0; s < seed_count; ++s) seeds.push_back(s + 1);
        result.config = config_for(seeds, 1, swap ? OrderPolicy::SwapAB : OrderPolicy::AsGiven);
        for (int s = 1; s <= seed_count; ++s) {
            for (int i = 0; i < items; ++i) {
                PreferenceLabel label;
                switch (rng.next() % 4) {
                    case 0: label = PreferenceLabel::PreferA; break;
                    case 1: label = PreferenceLabel::PreferB; break;
                    case 2: label = PreferenceLabel::Tie; break;
                    default: label = PreferenceLabel::NotAvailable; break;
                }
                OutcomeSource source = rng.next_unit() < 0.3
                                           ? OutcomeSource::RevertedToBaseline
                                           : OutcomeSource::AgentFinal;
                result.outcomes.emplace_back(s, "i" + std::to_string(i),
                                             labeled(label, source));
            }
        }
        for (TiePolicy policy : {TiePolicy::TieCountsWrong, TiePolicy::TieHalfCredit}) {
            AgreementStats main = compute_agreement(result, dataset, policy);
            AgreementStats oracle = recount_oracle(result, dataset, policy);
            check_close(main, oracle);
        }
    }
}

TEST_CASE("mean agreement ignores seed order") {
    std::vector<DatasetItem> dataset{item("1", PreferenceLabel::PreferA),
                                     item("2", PreferenceLabel::PreferB)};
    AnnotatorFn annotate = [](const PairwiseTask& task, std::int64_t seed) {
        return labeled(keyed_unit_draw(seed, task.id) < 0.5 ? PreferenceLabel::PreferA
                                                            : PreferenceLabel::PreferB);
    };
    RunResult forward = run(dataset, annotate, config_for({1, 2, 3}));
    RunResult backward = run(dataset, annotate, config_for({3, 1, 2}));
    CHECK(compute_agreement(forward, dataset, TiePolicy::TieCountsWrong).mean_agreement ==
          compute_agreement(backward, dataset, TiePolicy::TieCountsWrong).mean_agreement);
}

TEST_CASE("report rendering is sorted and fixed-point") {
    AgreementStats stats;
    stats.mean_agreement = 0.81;
    stats.std_dev = 0.0123;
    stats.tie_rate = 0.05;
    stats.not_available_rate = 0.0;
    stats.revert_rate = 0.739;
    std::vector<ReportRow> rows{{"facts", "baseline:pick-best", stats},
                                {"facts", "agent:pick-best", stats},
                                {"code", "agent:pick-best", stats}};

    std::string csv = render_report_csv(rows);
    CHECK(csv ==
          "dataset,annotator,mean,std,tie_rate,not_available_rate,revert_rate\n"
          "code,agent:pick-best,0.8100,0.0123,0.0500,0.0000,0.7390\n"
          "facts,agent:pick-best,0.8100,0.0123,0.0500,0.0000,0.7390\n"
          "facts,baseline:pick-best,0.8100,0.0123,0.0500,0.0000,0.7390\n");

    std::string md = render_report_markdown(rows);
    CHECK(md.find("| dataset | annotator | mean | std | tie_rate | not_available_rate | "
                  "revert_rate |") == 0);
    CHECK(md.find("| code | agent:pick-best | 0.8100 |") != std::string::npos);
    // byte-identical across calls
    CHECK(render_report_csv(rows) == csv);
    CHECK(render_report_markdown(rows) == md);
}

TEST_CASE("run result files round trip") {
    std::vector<DatasetItem> dataset{item("1", PreferenceLabel::PreferA)};
    AnnotatorFn annotate = [](const PairwiseTask&, std::int64_t) {
        PreferenceOutcome out = labeled(PreferenceLabel::PreferA, OutcomeSource::AgentFinal);
        out.continuous_score = 0.75;
        out.trace.raw_model_outputs.emplace_back("final_assessment", "raw text");
        return out;
    };
    RunResult result = run(dataset, annotate, config_for({1, 2}));
    result.dataset_digest = "abc123";
    result.prompt_digests["pick_best"] = "deadbeef";

    fs::path path = fs::temp_directory_path() / "run-result-roundtrip.json";
    save_run_result(path.string(), result);
    RunResult back = load_run_result(path.string());
    CHECK(back.config == result.config);
    CHECK(back.dataset_digest == result.dataset_digest);
    CHECK(back.prompt_digests == result.prompt_digests);
    CHECK(back.outcomes == result.outcomes);
    fs::remove(path);
}
