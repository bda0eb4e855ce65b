#include "arbiter/agent.hpp"

#include <set>

#include "arbiter/digest.hpp"

namespace arbiter {

void ToolRegistry::register_tool(ToolRegistryEntry entry) {
    if (entry.tool_id.empty()) throw error("tool needs an id");
    if (!entry.routing_rule || !entry.runner)
        throw error("tool '" + entry.tool_id + "' needs a routing rule and a runner");
    entry.assessment_schema.check_well_formed();
    for (const auto& existing : entries_)
        if (existing.tool_id == entry.tool_id)
            throw error("tool '" + entry.tool_id + "' registered twice");
    entries_.push_back(std::move(entry));
}

std::vector<DomainAssessment> assess_side(const PairwiseTask& task, Side side,
                                          const ToolRegistry& registry, const AnnotatorEnv& env,
                                          std::int64_t seed, ProvenanceTrace* trace) {
    env.check();
    if (registry.empty()) throw error("assessment needs a non-empty tool registry");

    std::string user = "Assess the following text: " + task.text(side) +
                       "\nThe text is a response to the following context: " + task.prompt;

    std::vector<DomainAssessment> assessments;
    for (const auto& tool : registry.entries()) {
        ChatRequest req;
        req.user = user;
        req.schema = tool.assessment_schema;
        req.model_tag = env.model_tag;
        req.seed = seed;

        DomainAssessment assessment;
        assessment.tool_id = tool.tool_id;
        std::string stage =
            "assess:" + tool.tool_id + ":" + (side == Side::A ? "a" : "b");
        try {
            StructuredResult res = env.gateway->complete_structured(req);
            if (trace)
                for (const auto& text : res.raw_texts)
                    trace->raw_model_outputs.emplace_back(stage, text);
            assessment.answers = res.record;
            assessment.deemed_useful = tool.routing_rule(res.record);
        } catch (const malformed_output_error& e) {
            // Fail closed: an unreadable assessment must not activate a tool.
            assessment.assessment_failed = true;
            assessment.deemed_useful = false;
            if (trace) trace->raw_model_outputs.emplace_back(stage, e.what());
        }
        assessments.push_back(std::move(assessment));
    }
    return assessments;
}

RoutingDecision route(const std::vector<DomainAssessment>& assess_a,
                      const std::vector<DomainAssessment>& assess_b, std::int64_t seed,
                      const std::string& task_id) {
    RoutingDecision decision;
    for (const auto& a : assess_a)
        if (a.deemed_useful) decision.tools_for_a.push_back(a.tool_id);
    for (const auto& b : assess_b)
        if (b.deemed_useful) decision.tools_for_b.push_back(b.tool_id);

    bool any_a = !decision.tools_for_a.empty();
    bool any_b = !decision.tools_for_b.empty();
    if (!any_a && !any_b) {
        decision.outcome = RoutingOutcome::RevertNoTool;
    } else if (any_a && any_b) {
        decision.outcome = RoutingOutcome::RunAgent;
    } else {
        double u = keyed_unit_draw(seed, task_id);
        decision.coin_draw = u;
        decision.outcome =
            u < 0.5 ? RoutingOutcome::RevertTieCoin : RoutingOutcome::RunAgentTieCoin;
    }
    return decision;
}

namespace {

std::string render_tool_outputs(const std::vector<ToolReport>& reports) {
    json combined = json::object();
    for (const auto& r : reports)
        if (r.ok) combined[r.tool_id] = r.output;
    return combined.dump();
}

}  // namespace

PreferenceOutcome final_assessment(const PairwiseTask& task,
                                   const std::vector<ToolReport>& reports_a,
                                   const std::vector<ToolReport>& reports_b,
                                   const AnnotatorEnv& env, std::int64_t seed) {
    env.check();
    ChatRequest req;
    req.user = "Compare the following two texts and select the better text according to the "
               "information provided:"
               "\n\n### text_a: " +
               task.text_a + "\n\n### text_b: " + task.text_b +
               "\nThe following tool output should also be taken into account:" +
               "\n\n### tool_output for text_a: " + render_tool_outputs(reports_a) +
               "\n\n### tool_output for text_b: " + render_tool_outputs(reports_b) +
               "\nBoth texts were a response to the following context: " + task.prompt;
    req.schema = selection_schema();
    req.model_tag = env.model_tag;
    req.seed = seed;

    PreferenceOutcome out;
    out.source = OutcomeSource::AgentFinal;
    try {
        StructuredResult res = env.gateway->complete_structured(req);
        for (const auto& text : res.raw_texts)
            out.trace.raw_model_outputs.emplace_back("final_assessment", text);
        out.reasoning = res.record.at("reasoning").get<std::string>();
        out.label = res.record.at("selected_text").get<std::string>() == "text_a"
                        ? PreferenceLabel::PreferA
                        : PreferenceLabel::PreferB;
    } catch (const malformed_output_error& e) {
        out.label = PreferenceLabel::NotAvailable;
        out.reasoning = e.what();
    }
    return out;
}

PreferenceOutcome annotate_agent(const PairwiseTask& task, const ToolRegistry& registry,
                                 BaselineKind baseline, const AnnotatorEnv& env,
                                 std::int64_t seed) {
    ProvenanceTrace trace;
    trace.assessments_a = assess_side(task, Side::A, registry, env, seed, &trace);
    trace.assessments_b = assess_side(task, Side::B, registry, env, seed, &trace);

    RoutingDecision routing = route(trace.assessments_a, trace.assessments_b, seed, task.id);
    trace.routing = routing;
    if (routing.coin_draw) trace.revert_coin = RevertCoin{seed, *routing.coin_draw};

    PreferenceOutcome out;
    if (routing.outcome == RoutingOutcome::RevertNoTool ||
        routing.outcome == RoutingOutcome::RevertTieCoin) {
        PreferenceOutcome base = annotate_baseline(baseline, task, env, seed);
        out = std::move(base);
        out.source = OutcomeSource::RevertedToBaseline;
        trace.raw_model_outputs.insert(trace.raw_model_outputs.end(),
                                       out.trace.raw_model_outputs.begin(),
                                       out.trace.raw_model_outputs.end());
        out.trace = std::move(trace);
        return out;
    }

    auto run_tools = [&](const std::vector<std::string>& tool_ids, Side side,
                         std::vector<ToolReport>& sink) {
        std::set<std::string> wanted(tool_ids.begin(), tool_ids.end());
        for (const auto& tool : registry.entries()) {
            if (!wanted.count(tool.tool_id)) continue;
            try {
                sink.push_back(tool.runner(task, side, seed));
            } catch (const std::exception& e) {
                ToolReport failed;
                failed.tool_id = tool.tool_id;
                failed.ok = false;
                failed.failure_reason = e.what();
                sink.push_back(std::move(failed));
            }
        }
    };
    run_tools(routing.tools_for_a, Side::A, trace.tool_reports_a);
    run_tools(routing.tools_for_b, Side::B, trace.tool_reports_b);

    auto any_ok = [](const std::vector<ToolReport>& reports) {
        for (const auto& r : reports)
            if (r.ok) return true;
        return false;
    };
    if (!any_ok(trace.tool_reports_a) && !any_ok(trace.tool_reports_b)) {
        out.label = PreferenceLabel::NotAvailable;
        out.source = OutcomeSource::AgentFinal;
        out.reasoning = "every dispatched tool run failed";
        out.trace = std::move(trace);
        return out;
    }

    out = final_assessment(task, trace.tool_reports_a, trace.tool_reports_b, env, seed);
    trace.raw_model_outputs.insert(trace.raw_model_outputs.end(),
                                   out.trace.raw_model_outputs.begin(),
                                   out.trace.raw_model_outputs.end());
    out.trace = std::move(trace);
    return out;
}

ToolRegistry make_default_registry(const AnnotatorEnv& env, SearchClient* search,
                                   const ExecSandbox* sandbox, FactToolConfig fact_config,
                                   VerifierConfig verifier_config) {
    env.check();
    if (!search) throw error("default registry needs a search client");
    if (!sandbox) throw error("default registry needs a sandbox");

    ToolRegistry registry;
    registry.register_tool(
        {kFactCheckToolId, fact_assessment_schema(),
         [](const json& record) { return fact_routing_rule(record); },
         [&env, search, fact_config](const PairwiseTask& task, Side side, std::int64_t seed) {
             FactCheckEnv fact_env;
             fact_env.gateway = env.gateway;
             fact_env.search = search;
             fact_env.model_tag = env.model_tag;
             fact_env.seed = seed;
             fact_env.config = fact_config;
             return run_fact_tool(task, side, fact_env);
         }});
    registry.register_tool(
        {kCodeCheckToolId, code_assessment_schema(),
         [](const json& record) { return code_routing_rule(record); },
         [&env, sandbox, verifier_config](const PairwiseTask& task, Side side,
                                          std::int64_t seed) {
             VerifierEnv verifier_env;
             verifier_env.gateway = env.gateway;
             verifier_env.sandbox = sandbox;
             verifier_env.model_tag = env.model_tag;
             verifier_env.seed = seed;
             verifier_env.config = verifier_config;
             return to_tool_report(kCodeCheckToolId,
                                   verify_code_answer(task.prompt, task.text(side), verifier_env));
         }});
    registry.register_tool(
        {kMathCheckToolId, math_assessment_schema(),
         [](const json& record) { return math_routing_rule(record); },
         [&env, sandbox, verifier_config](const PairwiseTask& task, Side side,
                                          std::int64_t seed) {
             VerifierEnv verifier_env;
             verifier_env.gateway = env.gateway;
             verifier_env.sandbox = sandbox;
             verifier_env.model_tag = env.model_tag;
             verifier_env.seed = seed;
             verifier_env.config = verifier_config;
             return to_tool_report(kMathCheckToolId,
                                   verify_math_answer(task.prompt, task.text(side), verifier_env));
         }});
    return registry;
}

}  // namespace arbiter
