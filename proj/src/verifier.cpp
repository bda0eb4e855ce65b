#include "arbiter/verifier.hpp"

namespace arbiter {

const char* const kCodeCheckToolId = "code_check";
const char* const kMathCheckToolId = "math_check";

namespace {

const char* kCodeInstruction =
    "You are a coding expert. "
    "Your goal is to evaluate whether code from a student is correct. "
    "Write and run code to verify the provided answer to the prompt. "
    "Think of unit tests to verify whether the code is correct. "
    "Only report back whether the solution was correct. "
    "Do not try to correct the code, they need to do that themselves.";

const char* kMathInstruction =
    "You are a personal math tutor. "
    "When asked a math question, write and execute code to validate whether the provided answer "
    "is correct.";

OutputSchema verifier_action_schema() {
    return OutputSchema{
        "VerifierAction",
        {SchemaField{"action",
                     "Next step: 'run_code' to execute a code snippet, or 'conclude' to finish "
                     "with a verdict.",
                     FieldKind::StringEnum,
                     {"run_code", "conclude"}},
         SchemaField{"code",
                     "Code to execute when action is 'run_code'; empty string when concluding.",
                     FieldKind::String,
                     {}},
         SchemaField{"verdict",
                     "Final verdict when action is 'conclude'; 'pending' while still running "
                     "code.",
                     FieldKind::StringEnum,
                     {"answer_correct", "answer_incorrect", "inconclusive", "pending"}},
         SchemaField{"conclusion",
                     "Final conclusion text when action is 'conclude'; empty string otherwise.",
                     FieldKind::String,
                     {}}}};
}

VerifierVerdict verdict_from_string(const std::string& s) {
    if (s == "answer_correct") return VerifierVerdict::AnswerCorrect;
    if (s == "answer_incorrect") return VerifierVerdict::AnswerIncorrect;
    return VerifierVerdict::Inconclusive;  // "inconclusive" and a stray "pending"
}

std::string clip(const std::string& s, std::size_t limit = 4096) {
    if (s.size() <= limit) return s;
    return s.substr(0, limit) + "\n[output clipped]";
}

VerifierReport run_verifier_loop(const std::string& instruction, const std::string& task_prompt,
                                 const std::string& text, const VerifierEnv& env) {
    env.check();
    VerifierReport report;

    std::string transcript = "For the prompt:\n```" + task_prompt +
                             "\n```\nis the provided answer correct?\n```" + text + "\n```";

    for (int step = 0; step < env.config.max_steps; ++step) {
        ChatRequest req;
        req.system = instruction;
        req.user = transcript;
        req.schema = verifier_action_schema();
        req.model_tag = env.model_tag;
        req.seed = env.seed;

        json record;
        try {
            record = env.gateway->complete_structured(req).record;
        } catch (const malformed_output_error& e) {
            report.verdict = VerifierVerdict::Inconclusive;
            report.conclusion = std::string("verification aborted: ") + e.what();
            return report;
        }

        if (record.at("action").get<std::string>() == "conclude") {
            report.verdict = verdict_from_string(record.at("verdict").get<std::string>());
            report.conclusion = record.at("conclusion").get<std::string>();
            if (report.verdict == VerifierVerdict::Inconclusive && report.conclusion.empty())
                report.conclusion = "verifier gave no usable conclusion";
            return report;
        }

        std::string code = record.at("code").get<std::string>();
        ExecutionOutcome outcome =
            env.sandbox->execute(code, env.config.interpreter_id, env.config.limits);
        report.steps.push_back({code, outcome});

        // Durations are deliberately left out: the transcript must be
        // byte-stable across runs for caching and replay.
        transcript += "\n\nYou ran the following code:\n```\n" + code +
                      "\n```\nExecution status: " + execution_status_to_string(outcome.status) +
                      ", exit code " + std::to_string(outcome.exit_code) + "\nstdout:\n```\n" +
                      clip(outcome.stdout_text) + "\n```\nstderr:\n```\n" +
                      clip(outcome.stderr_text) +
                      "\n```\nDecide your next step: run more code or conclude.";
    }

    report.verdict = VerifierVerdict::Inconclusive;
    report.conclusion = "step budget exhausted after " + std::to_string(env.config.max_steps) +
                        " executions without a conclusion";
    return report;
}

}  // namespace

OutputSchema code_assessment_schema() {
    return OutputSchema{
        "TextAssessment",
        {SchemaField{"code_useful", "Whether text might benefit from running code.",
                     FieldKind::Boolean,
                     {}}}};
}

OutputSchema math_assessment_schema() {
    return OutputSchema{
        "TextAssessment",
        {SchemaField{"math_question",
                     "Whether the text involves math or arithmetic that may benefit from careful "
                     "checking.",
                     FieldKind::Boolean,
                     {}}}};
}

bool code_routing_rule(const json& record) { return record.at("code_useful").get<bool>(); }

bool math_routing_rule(const json& record) { return record.at("math_question").get<bool>(); }

std::string verifier_verdict_to_string(VerifierVerdict v) {
    switch (v) {
        case VerifierVerdict::AnswerCorrect: return "answer_correct";
        case VerifierVerdict::AnswerIncorrect: return "answer_incorrect";
        case VerifierVerdict::Inconclusive: return "inconclusive";
    }
    throw error("unknown verifier verdict");
}

void VerifierEnv::check() const {
    if (!gateway) throw error("verifier needs a gateway");
    if (!sandbox) throw error("verifier needs a sandbox");
    if (config.max_steps < 1) throw error("max_steps must be >= 1");
}

VerifierReport verify_code_answer(const std::string& task_prompt, const std::string& text,
                                  const VerifierEnv& env) {
    return run_verifier_loop(kCodeInstruction, task_prompt, text, env);
}

VerifierReport verify_math_answer(const std::string& task_prompt, const std::string& text,
                                  const VerifierEnv& env) {
    return run_verifier_loop(kMathInstruction, task_prompt, text, env);
}

ToolReport to_tool_report(const std::string& tool_id, const VerifierReport& report) {
    ToolReport out;
    out.tool_id = tool_id;
    out.output = json{{"verdict", verifier_verdict_to_string(report.verdict)},
                      {"conclusion", report.conclusion}};
    return out;
}

}  // namespace arbiter
