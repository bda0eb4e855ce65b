#include "arbiter/core.hpp"

#include <set>

namespace arbiter {

std::string side_to_string(Side side) {
    return side == Side::A ? "a" : "b";
}

Side side_from_string(const std::string& s) {
    if (s == "a") return Side::A;
    if (s == "b") return Side::B;
    throw error("unknown side: " + s);
}

std::string label_to_string(PreferenceLabel label) {
    switch (label) {
        case PreferenceLabel::PreferA: return "prefer_a";
        case PreferenceLabel::PreferB: return "prefer_b";
        case PreferenceLabel::Tie: return "tie";
        case PreferenceLabel::NotAvailable: return "not_available";
    }
    throw error("invalid PreferenceLabel");
}

PreferenceLabel label_from_string(const std::string& s) {
    if (s == "prefer_a") return PreferenceLabel::PreferA;
    if (s == "prefer_b") return PreferenceLabel::PreferB;
    if (s == "tie") return PreferenceLabel::Tie;
    if (s == "not_available") return PreferenceLabel::NotAvailable;
    throw error("unknown preference label: " + s);
}

std::string source_to_string(OutcomeSource source) {
    switch (source) {
        case OutcomeSource::Baseline: return "baseline";
        case OutcomeSource::AgentFinal: return "agent_final";
        case OutcomeSource::RevertedToBaseline: return "reverted_to_baseline";
    }
    throw error("invalid OutcomeSource");
}

OutcomeSource source_from_string(const std::string& s) {
    if (s == "baseline") return OutcomeSource::Baseline;
    if (s == "agent_final") return OutcomeSource::AgentFinal;
    if (s == "reverted_to_baseline") return OutcomeSource::RevertedToBaseline;
    throw error("unknown outcome source: " + s);
}

std::string routing_outcome_to_string(RoutingOutcome outcome) {
    switch (outcome) {
        case RoutingOutcome::RunAgent: return "run_agent";
        case RoutingOutcome::RevertNoTool: return "revert_no_tool";
        case RoutingOutcome::RevertTieCoin: return "revert_tie_coin";
        case RoutingOutcome::RunAgentTieCoin: return "run_agent_tie_coin";
    }
    throw error("invalid RoutingOutcome");
}

RoutingOutcome routing_outcome_from_string(const std::string& s) {
    if (s == "run_agent") return RoutingOutcome::RunAgent;
    if (s == "revert_no_tool") return RoutingOutcome::RevertNoTool;
    if (s == "revert_tie_coin") return RoutingOutcome::RevertTieCoin;
    if (s == "run_agent_tie_coin") return RoutingOutcome::RunAgentTieCoin;
    throw error("unknown routing outcome: " + s);
}

std::string tie_policy_to_string(TiePolicy policy) {
    switch (policy) {
        case TiePolicy::TieCountsWrong: return "tie_counts_wrong";
        case TiePolicy::TieHalfCredit: return "tie_half_credit";
    }
    throw error("invalid TiePolicy");
}

TiePolicy tie_policy_from_string(const std::string& s) {
    if (s == "tie_counts_wrong" || s == "wrong") return TiePolicy::TieCountsWrong;
    if (s == "tie_half_credit" || s == "half") return TiePolicy::TieHalfCredit;
    throw error("unknown tie policy: " + s);
}

std::string order_policy_to_string(OrderPolicy policy) {
    switch (policy) {
        case OrderPolicy::AsGiven: return "as_given";
        case OrderPolicy::SwapAB: return "swap_ab";
    }
    throw error("invalid OrderPolicy");
}

OrderPolicy order_policy_from_string(const std::string& s) {
    if (s == "as_given" || s == "as-given") return OrderPolicy::AsGiven;
    if (s == "swap_ab" || s == "swap") return OrderPolicy::SwapAB;
    throw error("unknown order policy: " + s);
}

void RunConfig::validate() const {
    if (seeds.empty()) throw error("RunConfig: seeds must be non-empty");
    std::set<std::int64_t> unique(seeds.begin(), seeds.end());
    if (unique.size() != seeds.size()) throw error("RunConfig: seeds must be distinct");
    if (max_parallel < 1) throw error("RunConfig: max_parallel must be positive");
}

void to_json(json& j, const PairwiseTask& v) {
    j = json{{"id", v.id}, {"prompt", v.prompt}, {"text_a", v.text_a}, {"text_b", v.text_b}};
}

void from_json(const json& j, PairwiseTask& v) {
    j.at("id").get_to(v.id);
    j.at("prompt").get_to(v.prompt);
    j.at("text_a").get_to(v.text_a);
    j.at("text_b").get_to(v.text_b);
}

void to_json(json& j, const DomainAssessment& v) {
    j = json{{"tool_id", v.tool_id},
             {"answers", v.answers},
             {"deemed_useful", v.deemed_useful},
             {"assessment_failed", v.assessment_failed}};
}

void from_json(const json& j, DomainAssessment& v) {
    j.at("tool_id").get_to(v.tool_id);
    v.answers = j.at("answers");
    j.at("deemed_useful").get_to(v.deemed_useful);
    v.assessment_failed = j.value("assessment_failed", false);
}

void to_json(json& j, const ToolReport& v) {
    j = json{{"tool_id", v.tool_id},
             {"output", v.output},
             {"ok", v.ok},
             {"failure_reason", v.failure_reason}};
}

void from_json(const json& j, ToolReport& v) {
    j.at("tool_id").get_to(v.tool_id);
    v.output = j.at("output");
    v.ok = j.value("ok", true);
    v.failure_reason = j.value("failure_reason", std::string{});
}

void to_json(json& j, const RevertCoin& v) {
    j = json{{"seed_used", v.seed_used}, {"draw", v.draw}};
}

void from_json(const json& j, RevertCoin& v) {
    j.at("seed_used").get_to(v.seed_used);
    j.at("draw").get_to(v.draw);
}

void to_json(json& j, const RoutingDecision& v) {
    j = json{{"tools_for_a", v.tools_for_a},
             {"tools_for_b", v.tools_for_b},
             {"outcome", routing_outcome_to_string(v.outcome)}};
    if (v.coin_draw) j["coin_draw"] = *v.coin_draw;
}

void from_json(const json& j, RoutingDecision& v) {
    j.at("tools_for_a").get_to(v.tools_for_a);
    j.at("tools_for_b").get_to(v.tools_for_b);
    v.outcome = routing_outcome_from_string(j.at("outcome").get<std::string>());
    if (j.contains("coin_draw")) v.coin_draw = j.at("coin_draw").get<double>();
    else v.coin_draw.reset();
}

void to_json(json& j, const ProvenanceTrace& v) {
    j = json{{"assessments", json{{"a", v.assessments_a}, {"b", v.assessments_b}}},
             {"tool_reports", json{{"a", v.tool_reports_a}, {"b", v.tool_reports_b}}},
             {"raw_model_outputs", json::array()}};
    for (const auto& [tag, text] : v.raw_model_outputs) {
        j["raw_model_outputs"].push_back(json::array({tag, text}));
    }
    if (v.revert_coin) j["revert_coin"] = *v.revert_coin;
    if (v.routing) j["routing"] = *v.routing;
}

void from_json(const json& j, ProvenanceTrace& v) {
    const json& assess = j.at("assessments");
    assess.at("a").get_to(v.assessments_a);
    assess.at("b").get_to(v.assessments_b);
    const json& reports = j.at("tool_reports");
    reports.at("a").get_to(v.tool_reports_a);
    reports.at("b").get_to(v.tool_reports_b);
    v.raw_model_outputs.clear();
    for (const auto& entry : j.at("raw_model_outputs")) {
        v.raw_model_outputs.emplace_back(entry.at(0).get<std::string>(), entry.at(1).get<std::string>());
    }
    if (j.contains("revert_coin")) v.revert_coin = j.at("revert_coin").get<RevertCoin>();
    else v.revert_coin.reset();
    if (j.contains("routing")) v.routing = j.at("routing").get<RoutingDecision>();
    else v.routing.reset();
}

void to_json(json& j, const PreferenceOutcome& v) {
    j = json{{"label", label_to_string(v.label)},
             {"reasoning", v.reasoning},
             {"source", source_to_string(v.source)},
             {"trace", v.trace}};
    if (v.continuous_score) j["continuous_score"] = *v.continuous_score;
}

void from_json(const json& j, PreferenceOutcome& v) {
    v.label = label_from_string(j.at("label").get<std::string>());
    j.at("reasoning").get_to(v.reasoning);
    v.source = source_from_string(j.at("source").get<std::string>());
    j.at("trace").get_to(v.trace);
    if (j.contains("continuous_score")) v.continuous_score = j.at("continuous_score").get<double>();
    else v.continuous_score.reset();
}

void to_json(json& j, const DatasetItem& v) {
    if (v.gold != PreferenceLabel::PreferA && v.gold != PreferenceLabel::PreferB) {
        throw error("DatasetItem: gold must be prefer_a or prefer_b");
    }
    j = json{{"id", v.task.id},
             {"prompt", v.task.prompt},
             {"text_a", v.task.text_a},
             {"text_b", v.task.text_b},
             {"gold", v.gold == PreferenceLabel::PreferA ? "a" : "b"},
             {"subset_tag", v.subset_tag}};
}

void from_json(const json& j, DatasetItem& v) {
    j.at("id").get_to(v.task.id);
    j.at("prompt").get_to(v.task.prompt);
    j.at("text_a").get_to(v.task.text_a);
    j.at("text_b").get_to(v.task.text_b);
    const std::string gold = j.at("gold").get<std::string>();
    if (gold == "a") v.gold = PreferenceLabel::PreferA;
    else if (gold == "b") v.gold = PreferenceLabel::PreferB;
    else throw error("DatasetItem: gold must be 'a' or 'b', got '" + gold + "'");
    v.subset_tag = j.value("subset_tag", std::string{});
}

void to_json(json& j, const RunConfig& v) {
    j = json{{"seeds", v.seeds},
             {"annotator_id", v.annotator_id},
             {"backend_id", v.backend_id},
             {"max_parallel", v.max_parallel},
             {"tie_policy", tie_policy_to_string(v.tie_policy)},
             {"order_policy", order_policy_to_string(v.order_policy)}};
}

void from_json(const json& j, RunConfig& v) {
    j.at("seeds").get_to(v.seeds);
    j.at("annotator_id").get_to(v.annotator_id);
    j.at("backend_id").get_to(v.backend_id);
    j.at("max_parallel").get_to(v.max_parallel);
    v.tie_policy = tie_policy_from_string(j.at("tie_policy").get<std::string>());
    v.order_policy = order_policy_from_string(j.at("order_policy").get<std::string>());
}

}  // namespace arbiter
