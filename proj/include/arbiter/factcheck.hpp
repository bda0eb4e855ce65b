#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "arbiter/core.hpp"
#include "arbiter/gateway.hpp"
#include "arbiter/search.hpp"

namespace arbiter {

struct FactAssessmentAnswers {
    bool contains_facts = false;
    bool is_like_wiki = false;
    bool is_maths = false;
    bool is_wordcount = false;
    int confidence_websearch_will_help = 0;

    static FactAssessmentAnswers from_record(const json& record);
};

/// Structured output for the fact tool's initial assessment.
OutputSchema fact_assessment_schema();

/// Run the fact checker iff the text has checkable facts, is not a maths
/// solution or a word count, and the model rates web search at least 3/5
/// ("may help").
bool fact_routing_rule(const FactAssessmentAnswers& answers);
bool fact_routing_rule(const json& record);

struct AtomicFact {
    std::string raw;
    std::string self_contained;
    std::optional<bool> truthful;
    std::string verdict_reasoning;
    int searches_used = 0;
    bool degraded = false;  // verdict or self-containment fell back on an error path
};

struct FactToolConfig {
    int max_searches_per_fact = 3;
    int max_results_per_search = 5;
};

struct FactCheckEnv {
    LlmGateway* gateway = nullptr;
    SearchClient* search = nullptr;
    std::string model_tag = "offline-mock";
    std::int64_t seed = 0;
    FactToolConfig config;

    void check() const;
};

/// Splits a response into independently checkable fact statements.
/// Throws malformed_output_error when no usable list could be decoded.
std::vector<std::string> extract_atomic_facts(const std::string& text,
                                              const std::string& task_prompt,
                                              const FactCheckEnv& env);

/// Rewrites one fact so it stands alone. Falls back to the raw fact on decode
/// failure (sets *degraded).
std::string make_self_contained(const std::string& fact, const std::string& response_text,
                                const std::string& task_prompt, const FactCheckEnv& env,
                                bool* degraded);

struct FactVerdict {
    bool truthful = false;
    std::string reasoning;
    int searches_used = 0;
    bool degraded = false;
};

/// Judges one self-contained fact against at most
/// config.max_searches_per_fact web searches. Missing evidence or decode
/// failure yields a conservative untruthful verdict, never an exception.
FactVerdict check_fact(const std::string& fact, const FactCheckEnv& env);

/// "✅ <fact>" / "❌ <fact>" lines, one per fact, in input order. Facts with
/// no verdict render as unsupported.
std::vector<std::string> render_fact_report(const std::vector<AtomicFact>& facts);

int count_supported(const std::vector<std::string>& lines);

/// Full pipeline for one response side. ok=false only when fact extraction
/// itself failed; output carries {lines, supported_count, unsupported_count}.
ToolReport run_fact_tool(const PairwiseTask& task, Side side, const FactCheckEnv& env);

extern const char* const kFactCheckToolId;

}  // namespace arbiter
