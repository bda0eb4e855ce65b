#pragma once

#include <functional>
#include <string>

#include "arbiter/agent.hpp"
#include "arbiter/baselines.hpp"
#include "arbiter/core.hpp"

namespace arbiter {

// Parsed form of an annotator id like "baseline:pick-best" or "agent:arena-hard".
// The agent always wraps a named baseline: that is what it reverts to.
struct AnnotatorSpec {
    bool is_agent = false;
    BaselineKind baseline = BaselineKind::PickBest;

    std::string to_string() const;
};

// Accepts "agent:<baseline>" and "baseline:<kind>"; throws error on anything else.
AnnotatorSpec parse_annotator_spec(const std::string& text);

using AnnotatorFn = std::function<PreferenceOutcome(const PairwiseTask&, std::int64_t seed)>;

// Binds a spec to a callable. Agent specs need a registry; baseline specs ignore it.
// The referenced env (and registry, if any) must outlive the returned function.
AnnotatorFn make_annotator(const AnnotatorSpec& spec, const AnnotatorEnv& env,
                           const ToolRegistry* registry = nullptr);

}  // namespace arbiter
