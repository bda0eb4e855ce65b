#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arbiter/core.hpp"
#include "arbiter/gateway.hpp"
#include "arbiter/sandbox.hpp"

namespace arbiter {

OutputSchema code_assessment_schema();
OutputSchema math_assessment_schema();

bool code_routing_rule(const json& record);
bool math_routing_rule(const json& record);

enum class VerifierVerdict { AnswerCorrect, AnswerIncorrect, Inconclusive };

std::string verifier_verdict_to_string(VerifierVerdict v);

struct VerifierStep {
    std::string code;
    ExecutionOutcome outcome;
};

/// Outcome of one verification loop. Only conclusion/verdict feed the final
/// assessment; the step transcript is kept for inspection and tests.
struct VerifierReport {
    VerifierVerdict verdict = VerifierVerdict::Inconclusive;
    std::string conclusion;
    std::vector<VerifierStep> steps;
};

struct VerifierConfig {
    int max_steps = 5;
    std::string interpreter_id = "python3";
    ExecutionLimits limits;
};

struct VerifierEnv {
    LlmGateway* gateway = nullptr;
    const ExecSandbox* sandbox = nullptr;
    std::string model_tag = "offline-mock";
    std::int64_t seed = 0;
    VerifierConfig config;

    void check() const;
};

/// LLM-driven check of a coding answer: the model may run snippets in the
/// sandbox (each outcome is fed back) and must finish with a verdict within
/// config.max_steps executions.
VerifierReport verify_code_answer(const std::string& task_prompt, const std::string& text,
                                  const VerifierEnv& env);

/// Same loop under the math-tutor instruction.
VerifierReport verify_math_answer(const std::string& task_prompt, const std::string& text,
                                  const VerifierEnv& env);

/// ToolReport wrapper: output = {verdict, conclusion}.
ToolReport to_tool_report(const std::string& tool_id, const VerifierReport& report);

extern const char* const kCodeCheckToolId;
extern const char* const kMathCheckToolId;

}  // namespace arbiter
