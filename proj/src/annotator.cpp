#include "arbiter/annotator.hpp"

namespace arbiter {

std::string AnnotatorSpec::to_string() const {
    return (is_agent ? "agent:" : "baseline:") + baseline_kind_to_string(baseline);
}

AnnotatorSpec parse_annotator_spec(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos)
        throw error("annotator id '" + text +
                    "' must look like agent:<baseline> or baseline:<kind>");
    std::string head = text.substr(0, colon);
    std::string tail = text.substr(colon + 1);

    AnnotatorSpec spec;
    if (head == "agent")
        spec.is_agent = true;
    else if (head == "baseline")
        spec.is_agent = false;
    else
        throw error("annotator id '" + text + "' must start with 'agent:' or 'baseline:'");
    spec.baseline = baseline_kind_from_string(tail);
    return spec;
}

AnnotatorFn make_annotator(const AnnotatorSpec& spec, const AnnotatorEnv& env,
                           const ToolRegistry* registry) {
    env.check();
    if (!spec.is_agent) {
        BaselineKind kind = spec.baseline;
        return [kind, &env](const PairwiseTask& task, std::int64_t seed) {
            return annotate_baseline(kind, task, env, seed);
        };
    }
    if (!registry || registry->empty())
        throw error("agent annotator '" + spec.to_string() + "' needs a tool registry");
    BaselineKind kind = spec.baseline;
    return [kind, &env, registry](const PairwiseTask& task, std::int64_t seed) {
        return annotate_agent(task, *registry, kind, env, seed);
    };
}

}  // namespace arbiter
