#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "arbiter/baselines.hpp"
#include "arbiter/core.hpp"
#include "arbiter/factcheck.hpp"
#include "arbiter/gateway.hpp"
#include "arbiter/sandbox.hpp"
#include "arbiter/search.hpp"
#include "arbiter/verifier.hpp"

namespace arbiter {

/// One pluggable validation tool: an assessment schema probed during the
/// initial domain assessment, a routing rule over the structured answers, and
/// a runner invoked per deemed-useful (task, side).
struct ToolRegistryEntry {
    std::string tool_id;
    OutputSchema assessment_schema;
    std::function<bool(const json&)> routing_rule;
    /// The seed is threaded through so the registry can be built once per run
    /// while tool calls stay deterministic per grid cell.
    std::function<ToolReport(const PairwiseTask&, Side, std::int64_t)> runner;
};

class ToolRegistry {
  public:
    void register_tool(ToolRegistryEntry entry);
    const std::vector<ToolRegistryEntry>& entries() const { return entries_; }
    bool empty() const { return entries_.empty(); }

  private:
    std::vector<ToolRegistryEntry> entries_;
};

/// Step 1: one structured probe per registered tool for one response side.
/// Decode failures fail closed (tool deemed not useful, assessment_failed
/// set). Raw model texts are appended to *trace when given.
std::vector<DomainAssessment> assess_side(const PairwiseTask& task, Side side,
                                          const ToolRegistry& registry, const AnnotatorEnv& env,
                                          std::int64_t seed, ProvenanceTrace* trace = nullptr);

/// Routing: tools useful on both sides run the agent; none anywhere reverts
/// outright; tools on exactly one side flip a per-item coin derived from
/// (seed, task_id) — below 0.5 reverts, otherwise the agent runs one-sided.
RoutingDecision route(const std::vector<DomainAssessment>& assess_a,
                      const std::vector<DomainAssessment>& assess_b, std::int64_t seed,
                      const std::string& task_id);

/// Step 3: forced A/B choice over both texts plus every successful tool
/// report; a side with no usable report renders as the empty record {}.
PreferenceOutcome final_assessment(const PairwiseTask& task,
                                   const std::vector<ToolReport>& reports_a,
                                   const std::vector<ToolReport>& reports_b,
                                   const AnnotatorEnv& env, std::int64_t seed);

/// Full pipeline: assess both sides, route, then either run the deemed-useful
/// tools into a final assessment or delegate to the named baseline.
PreferenceOutcome annotate_agent(const PairwiseTask& task, const ToolRegistry& registry,
                                 BaselineKind baseline, const AnnotatorEnv& env,
                                 std::int64_t seed);

/// Registry with the three standard tools (fact_check, code_check,
/// math_check) wired to the given search client and sandbox. The pointed-to
/// env/search/sandbox must outlive the registry.
ToolRegistry make_default_registry(const AnnotatorEnv& env, SearchClient* search,
                                   const ExecSandbox* sandbox, FactToolConfig fact_config = {},
                                   VerifierConfig verifier_config = {});

}  // namespace arbiter
