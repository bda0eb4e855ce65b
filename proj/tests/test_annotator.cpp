#include <doctest.h>

#include <memory>

#include "arbiter/annotator.hpp"

using namespace arbiter;

TEST_CASE("annotator spec grammar") {
    AnnotatorSpec spec = parse_annotator_spec("baseline:pick-best");
    CHECK_FALSE(spec.is_agent);
    CHECK(spec.baseline == BaselineKind::PickBest);
    CHECK(spec.to_string() == "baseline:pick-best");

    spec = parse_annotator_spec("agent:arena-hard");
    CHECK(spec.is_agent);
    CHECK(spec.baseline == BaselineKind::ArenaHardStyle);
    CHECK(spec.to_string() == "agent:arena-hard");

    CHECK(parse_annotator_spec("agent:weighted_logprob").baseline ==
          BaselineKind::WeightedLogprob);

    CHECK_THROWS_AS(parse_annotator_spec("pick-best"), error);
    CHECK_THROWS_AS(parse_annotator_spec("judge:pick-best"), error);
    CHECK_THROWS_AS(parse_annotator_spec("agent:nonsense"), error);
    CHECK_THROWS_AS(parse_annotator_spec("agent:"), error);
}

TEST_CASE("make_annotator binds baseline and agent callables") {
    auto backend = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{
        {"Select the better", json{{"reasoning", "r"}, {"selected_text", "text_a"}}, {}, {},
         false}});
    LlmGateway gateway(backend, BackendSpec{});
    PromptStore prompts = PromptStore::builtin();
    AnnotatorEnv env;
    env.gateway = &gateway;
    env.prompts = &prompts;

    PairwiseTask task{"t", "p", "x", "y"};
    AnnotatorFn baseline = make_annotator(parse_annotator_spec("baseline:pick-best"), env);
    CHECK(baseline(task, 1).label == PreferenceLabel::PreferA);

    // an agent spec without a registry is a wiring error
    CHECK_THROWS_AS(make_annotator(parse_annotator_spec("agent:pick-best"), env), error);
    ToolRegistry empty;
    CHECK_THROWS_AS(make_annotator(parse_annotator_spec("agent:pick-best"), env, &empty), error);

    ToolRegistry registry;
    registry.register_tool(
        {"noop", OutputSchema{"TextAssessment", {{"flag", "d", FieldKind::Boolean, {}}}},
         [](const json&) { return false; },
         [](const PairwiseTask&, Side, std::int64_t) { return ToolReport{}; }});
    auto mock_with_assess = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{
        {"Assess the following text", json{{"flag", false}}, {}, {}, false},
        {"Select the better", json{{"reasoning", "r"}, {"selected_text", "text_b"}}, {}, {},
         false}});
    LlmGateway agent_gateway(mock_with_assess, BackendSpec{});
    env.gateway = &agent_gateway;
    AnnotatorFn agent = make_annotator(parse_annotator_spec("agent:pick-best"), env, &registry);
    PreferenceOutcome out = agent(task, 1);
    CHECK(out.label == PreferenceLabel::PreferB);
    CHECK(out.source == OutcomeSource::RevertedToBaseline);
}
