#include <doctest.h>

#include "arbiter/core.hpp"

using namespace arbiter;

TEST_CASE("enum string round trips") {
    for (auto label : {PreferenceLabel::PreferA, PreferenceLabel::PreferB, PreferenceLabel::Tie,
                       PreferenceLabel::NotAvailable})
        CHECK(label_from_string(label_to_string(label)) == label);
    for (auto source :
         {OutcomeSource::Baseline, OutcomeSource::AgentFinal, OutcomeSource::RevertedToBaseline})
        CHECK(source_from_string(source_to_string(source)) == source);
    for (auto outcome : {RoutingOutcome::RunAgent, RoutingOutcome::RevertNoTool,
                         RoutingOutcome::RevertTieCoin, RoutingOutcome::RunAgentTieCoin})
        CHECK(routing_outcome_from_string(routing_outcome_to_string(outcome)) == outcome);
    CHECK(side_from_string(side_to_string(Side::A)) == Side::A);
    CHECK(side_from_string(side_to_string(Side::B)) == Side::B);
    CHECK_THROWS_AS(label_from_string("prefer_c"), error);
}

TEST_CASE("task text selection by side") {
    PairwiseTask task{"t1", "p", "left", "right"};
    CHECK(task.text(Side::A) == "left");
    CHECK(task.text(Side::B) == "right");
}

TEST_CASE("dataset item json round trip") {
    DatasetItem item;
    item.task = {"id-1", "why is the sky blue?", "scattering", "magnets"};
    item.gold = PreferenceLabel::PreferA;
    item.subset_tag = "physics";

    json j = item;
    CHECK(j.at("gold") == "a");
    CHECK(j.at("id") == "id-1");
    DatasetItem back = j.get<DatasetItem>();
    CHECK(back == item);
}

TEST_CASE("dataset item rejects gold outside a/b") {
    DatasetItem item;
    item.task = {"id-1", "p", "x", "y"};
    item.gold = PreferenceLabel::Tie;
    CHECK_THROWS_AS([&] { json j = item; }(), error);

    json j{{"id", "i"}, {"prompt", "p"}, {"text_a", "x"}, {"text_b", "y"}, {"gold", "c"}};
    CHECK_THROWS_AS(j.get<DatasetItem>(), error);
}

TEST_CASE("preference outcome json round trip keeps trace") {
    PreferenceOutcome outcome;
    outcome.label = PreferenceLabel::PreferB;
    outcome.reasoning = "b cites evidence";
    outcome.source = OutcomeSource::AgentFinal;
    outcome.continuous_score = 0.25;
    outcome.trace.assessments_a.push_back(
        {"fact_check", json{{"contains_facts", true}}, true, false});
    outcome.trace.tool_reports_b.push_back({"fact_check", json{{"supported_count", 2}}, true, ""});
    outcome.trace.revert_coin = RevertCoin{7, 0.1};
    outcome.trace.routing = RoutingDecision{{"fact_check"}, {}, RoutingOutcome::RunAgentTieCoin, 0.9};
    outcome.trace.raw_model_outputs.emplace_back("final_assessment", "{\"x\":1}");

    json j = outcome;
    PreferenceOutcome back = j.get<PreferenceOutcome>();
    CHECK(back == outcome);
}

TEST_CASE("run config validation") {
    RunConfig config;
    config.annotator_id = "baseline:pick-best";
    config.backend_id = "mock:script.jsonl";
    config.validate();

    RunConfig no_seeds = config;
    no_seeds.seeds.clear();
    CHECK_THROWS_AS(no_seeds.validate(), error);

    RunConfig duplicate_seeds = config;
    duplicate_seeds.seeds = {1, 1};
    CHECK_THROWS_AS(duplicate_seeds.validate(), error);

    RunConfig zero_parallel = config;
    zero_parallel.max_parallel = 0;
    CHECK_THROWS_AS(zero_parallel.validate(), error);

    json j = config;
    CHECK(j.get<RunConfig>() == config);
}
