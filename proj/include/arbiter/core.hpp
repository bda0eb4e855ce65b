#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace arbiter {

using json = nlohmann::json;

/// Base class for all errors raised by this library.
struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class Side { A, B };

std::string side_to_string(Side side);
Side side_from_string(const std::string& s);

/// A prompt plus two candidate response texts, the atomic unit of annotation.
struct PairwiseTask {
    std::string id;
    std::string prompt;
    std::string text_a;
    std::string text_b;

    const std::string& text(Side side) const { return side == Side::A ? text_a : text_b; }

    bool operator==(const PairwiseTask&) const = default;
};

enum class PreferenceLabel { PreferA, PreferB, Tie, NotAvailable };

std::string label_to_string(PreferenceLabel label);
PreferenceLabel label_from_string(const std::string& s);

enum class OutcomeSource { Baseline, AgentFinal, RevertedToBaseline };

std::string source_to_string(OutcomeSource source);
OutcomeSource source_from_string(const std::string& s);

/// One tool's structured answers from the initial domain assessment, plus the
/// routing verdict the tool's own rule derived from them.
struct DomainAssessment {
    std::string tool_id;
    json answers = json::object();
    bool deemed_useful = false;
    bool assessment_failed = false;

    bool operator==(const DomainAssessment&) const = default;
};

/// Rendered findings of one tool run for one response text. `output` is the
/// JSON value fed into the final assessment prompt (a fact checklist, an
/// execution conclusion, ...). Failed runs keep ok=false and never reach the
/// final prompt, but stay in the trace.
struct ToolReport {
    std::string tool_id;
    json output = json::object();
    bool ok = true;
    std::string failure_reason;

    bool operator==(const ToolReport&) const = default;
};

struct RevertCoin {
    std::int64_t seed_used = 0;
    double draw = 0.0;

    bool operator==(const RevertCoin&) const = default;
};

enum class RoutingOutcome { RunAgent, RevertNoTool, RevertTieCoin, RunAgentTieCoin };

std::string routing_outcome_to_string(RoutingOutcome outcome);
RoutingOutcome routing_outcome_from_string(const std::string& s);

struct RoutingDecision {
    std::vector<std::string> tools_for_a;
    std::vector<std::string> tools_for_b;
    RoutingOutcome outcome = RoutingOutcome::RevertNoTool;
    std::optional<double> coin_draw;

    bool operator==(const RoutingDecision&) const = default;
};

/// Everything recorded about how an outcome was produced.
struct ProvenanceTrace {
    std::vector<DomainAssessment> assessments_a;
    std::vector<DomainAssessment> assessments_b;
    std::vector<ToolReport> tool_reports_a;
    std::vector<ToolReport> tool_reports_b;
    std::optional<RevertCoin> revert_coin;
    std::optional<RoutingDecision> routing;
    /// (stage-tag, raw model text) pairs in call order.
    std::vector<std::pair<std::string, std::string>> raw_model_outputs;

    bool operator==(const ProvenanceTrace&) const = default;
};

/// An annotator's verdict for one task.
struct PreferenceOutcome {
    PreferenceLabel label = PreferenceLabel::NotAvailable;
    std::string reasoning;
    OutcomeSource source = OutcomeSource::Baseline;
    /// Probability mass on PreferA; present only for the weighted-logprob baseline.
    std::optional<double> continuous_score;
    ProvenanceTrace trace;

    bool operator==(const PreferenceOutcome&) const = default;
};

/// A task with a known-better response. gold is restricted to PreferA/PreferB.
struct DatasetItem {
    PairwiseTask task;
    PreferenceLabel gold = PreferenceLabel::PreferA;
    std::string subset_tag;

    bool operator==(const DatasetItem&) const = default;
};

enum class TiePolicy { TieCountsWrong, TieHalfCredit };

std::string tie_policy_to_string(TiePolicy policy);
TiePolicy tie_policy_from_string(const std::string& s);

enum class OrderPolicy { AsGiven, SwapAB };

std::string order_policy_to_string(OrderPolicy policy);
OrderPolicy order_policy_from_string(const std::string& s);

struct RunConfig {
    std::vector<std::int64_t> seeds = {1, 2, 3, 4, 5};
    std::string annotator_id;
    std::string backend_id;
    int max_parallel = 4;
    TiePolicy tie_policy = TiePolicy::TieCountsWrong;
    OrderPolicy order_policy = OrderPolicy::AsGiven;

    void validate() const;

    bool operator==(const RunConfig&) const = default;
};

// Canonical serialized form: JSON objects with snake_case keys.
// docs/wire_format.md documents the schema of every type below.
void to_json(json& j, const PairwiseTask& v);
void from_json(const json& j, PairwiseTask& v);
void to_json(json& j, const DomainAssessment& v);
void from_json(const json& j, DomainAssessment& v);
void to_json(json& j, const ToolReport& v);
void from_json(const json& j, ToolReport& v);
void to_json(json& j, const RevertCoin& v);
void from_json(const json& j, RevertCoin& v);
void to_json(json& j, const RoutingDecision& v);
void from_json(const json& j, RoutingDecision& v);
void to_json(json& j, const ProvenanceTrace& v);
void from_json(const json& j, ProvenanceTrace& v);
void to_json(json& j, const PreferenceOutcome& v);
void from_json(const json& j, PreferenceOutcome& v);
void to_json(json& j, const DatasetItem& v);
void from_json(const json& j, DatasetItem& v);
void to_json(json& j, const RunConfig& v);
void from_json(const json& j, RunConfig& v);

}  // namespace arbiter
