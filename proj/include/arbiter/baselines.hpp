#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "arbiter/core.hpp"
#include "arbiter/gateway.hpp"
#include "arbiter/prompts.hpp"

namespace arbiter {

enum class BaselineKind { PickBest, WeightedLogprob, ArenaHardStyle };

std::string baseline_kind_to_string(BaselineKind kind);
BaselineKind baseline_kind_from_string(const std::string& s);

/// Five-way bracketed verdict grammar used by the extended-instruction judge.
enum class ArenaHardVerdict { AMuchBetter, ABetter, Tie, BBetter, BMuchBetter };

std::string arena_verdict_render(ArenaHardVerdict v);
/// Last occurrence of any of the five surface forms wins; nullopt when none
/// appears (chain-of-thought text often quotes candidate verdicts before the
/// final one).
std::optional<ArenaHardVerdict> parse_last_arena_verdict(const std::string& text);
PreferenceLabel arena_verdict_to_label(ArenaHardVerdict v);

/// The forced-choice schema shared by the pick-best baseline and the agent's
/// final assessment: a short justification plus 'text_a'/'text_b'.
OutputSchema selection_schema();

/// Everything an annotator call needs besides the task and the seed.
struct AnnotatorEnv {
    LlmGateway* gateway = nullptr;
    const PromptStore* prompts = nullptr;
    std::string model_tag = "offline-mock";

    void check() const;
};

PreferenceOutcome annotate_pick_best(const PairwiseTask& task, const AnnotatorEnv& env,
                                     std::int64_t seed);
PreferenceOutcome annotate_weighted_logprob(const PairwiseTask& task, const AnnotatorEnv& env,
                                            std::int64_t seed);
PreferenceOutcome annotate_arena_hard(const PairwiseTask& task, const AnnotatorEnv& env,
                                      std::int64_t seed);

PreferenceOutcome annotate_baseline(BaselineKind kind, const PairwiseTask& task,
                                    const AnnotatorEnv& env, std::int64_t seed);

}  // namespace arbiter
