#include "arbiter/baselines.hpp"

#include <cmath>

namespace arbiter {

std::string baseline_kind_to_string(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::PickBest: return "pick-best";
        case BaselineKind::WeightedLogprob: return "weighted-logprob";
        case BaselineKind::ArenaHardStyle: return "arena-hard";
    }
    throw error("unknown baseline kind");
}

BaselineKind baseline_kind_from_string(const std::string& s) {
    if (s == "pick-best" || s == "pick_best") return BaselineKind::PickBest;
    if (s == "weighted-logprob" || s == "weighted_logprob") return BaselineKind::WeightedLogprob;
    if (s == "arena-hard" || s == "arena_hard") return BaselineKind::ArenaHardStyle;
    throw error("unknown baseline kind: " + s);
}

std::string arena_verdict_render(ArenaHardVerdict v) {
    switch (v) {
        case ArenaHardVerdict::AMuchBetter: return "[[A>>B]]";
        case ArenaHardVerdict::ABetter: return "[[A>B]]";
        case ArenaHardVerdict::Tie: return "[[A=B]]";
        case ArenaHardVerdict::BBetter: return "[[B>A]]";
        case ArenaHardVerdict::BMuchBetter: return "[[B>>A]]";
    }
    throw error("unknown verdict");
}

std::optional<ArenaHardVerdict> parse_last_arena_verdict(const std::string& text) {
    constexpr ArenaHardVerdict all[] = {ArenaHardVerdict::AMuchBetter, ArenaHardVerdict::ABetter,
                                        ArenaHardVerdict::Tie, ArenaHardVerdict::BBetter,
                                        ArenaHardVerdict::BMuchBetter};
    std::optional<ArenaHardVerdict> best;
    std::size_t best_pos = 0;
    for (ArenaHardVerdict v : all) {
        std::size_t pos = text.rfind(arena_verdict_render(v));
        if (pos == std::string::npos) continue;
        if (!best || pos > best_pos) {
            best = v;
            best_pos = pos;
        }
    }
    return best;
}

PreferenceLabel arena_verdict_to_label(ArenaHardVerdict v) {
    switch (v) {
        case ArenaHardVerdict::AMuchBetter:
        case ArenaHardVerdict::ABetter: return PreferenceLabel::PreferA;
        case ArenaHardVerdict::Tie: return PreferenceLabel::Tie;
        case ArenaHardVerdict::BBetter:
        case ArenaHardVerdict::BMuchBetter: return PreferenceLabel::PreferB;
    }
    throw error("unknown verdict");
}

OutputSchema selection_schema() {
    return OutputSchema{
        "EvaluationResult",
        {SchemaField{"reasoning",
                     "A short justification for selecting one text over the other.",
                     FieldKind::String,
                     {}},
         SchemaField{"selected_text",
                     "Selected text that is better than the other text. Must be one of the "
                     "following two strings: 'text_a' or 'text_b'. Do not set as the selected "
                     "text string itself.",
                     FieldKind::StringEnum,
                     {"text_a", "text_b"}}}};
}

void AnnotatorEnv::check() const {
    if (!gateway) throw error("annotator env needs a gateway");
    if (!prompts) throw error("annotator env needs a prompt store");
}

namespace {

void record_raw(ProvenanceTrace& trace, const std::string& stage,
                const std::vector<std::string>& texts) {
    for (const auto& t : texts) trace.raw_model_outputs.emplace_back(stage, t);
}

}  // namespace

PreferenceOutcome annotate_pick_best(const PairwiseTask& task, const AnnotatorEnv& env,
                                     std::int64_t seed) {
    env.check();
    ChatRequest req;
    req.user = env.prompts->render("pick_best", task);
    req.schema = selection_schema();
    req.model_tag = env.model_tag;
    req.seed = seed;

    PreferenceOutcome out;
    out.source = OutcomeSource::Baseline;
    try {
        StructuredResult res = env.gateway->complete_structured(req);
        record_raw(out.trace, "pick_best", res.raw_texts);
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

PreferenceOutcome annotate_weighted_logprob(const PairwiseTask& task, const AnnotatorEnv& env,
                                            std::int64_t seed) {
    env.check();
    ChatRequest req;
    req.user = env.prompts->render("weighted_logprob", task);
    req.want_token_alternatives = true;
    req.model_tag = env.model_tag;
    req.seed = seed;

    PreferenceOutcome out;
    out.source = OutcomeSource::Baseline;
    ChatResponse res;
    try {
        res = env.gateway->complete_with_token_alternatives(req);
    } catch (const backend_lacks_logprobs_error& e) {
        out.label = PreferenceLabel::NotAvailable;
        out.reasoning = e.what();
        return out;
    }
    out.trace.raw_model_outputs.emplace_back("weighted_logprob", res.text);

    auto strip = [](const std::string& s) {
        auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return std::string{};
        auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    };

    // Probability mass on the two verdict tokens at the first generated
    // position; tokenizer variants like " A" fold into "A".
    double p_a = 0.0, p_b = 0.0;
    bool saw_a = false, saw_b = false;
    for (const auto& cand : res.token_alternatives->front().candidates) {
        std::string tok = strip(cand.token);
        if (tok == "A") {
            p_a += std::exp(cand.logprob);
            saw_a = true;
        } else if (tok == "B") {
            p_b += std::exp(cand.logprob);
            saw_b = true;
        }
    }
    if (!saw_a && !saw_b) {
        out.label = PreferenceLabel::NotAvailable;
        out.reasoning = "neither verdict token among the reported alternatives";
        return out;
    }

    double score = p_a / (p_a + p_b);
    out.continuous_score = score;
    if (score > 0.5) {
        out.label = PreferenceLabel::PreferA;
    } else if (score < 0.5) {
        out.label = PreferenceLabel::PreferB;
    } else {
        out.label = PreferenceLabel::Tie;
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "p(A)=%.6f over both verdict tokens", score);
    out.reasoning = buf;
    return out;
}

PreferenceOutcome annotate_arena_hard(const PairwiseTask& task, const AnnotatorEnv& env,
                                      std::int64_t seed) {
    env.check();
    ChatRequest req;
    req.user = env.prompts->render("arena_hard", task);
    req.model_tag = env.model_tag;
    req.seed = seed;

    PreferenceOutcome out;
    out.source = OutcomeSource::Baseline;
    ChatResponse res = env.gateway->complete_text(req);
    out.trace.raw_model_outputs.emplace_back("arena_hard", res.text);
    out.reasoning = res.text;

    if (auto verdict = parse_last_arena_verdict(res.text)) {
        out.label = arena_verdict_to_label(*verdict);
    } else {
        out.label = PreferenceLabel::NotAvailable;
        out.reasoning = "no bracketed verdict found in: " + res.text;
    }
    return out;
}

PreferenceOutcome annotate_baseline(BaselineKind kind, const PairwiseTask& task,
                                    const AnnotatorEnv& env, std::int64_t seed) {
    switch (kind) {
        case BaselineKind::PickBest: return annotate_pick_best(task, env, seed);
        case BaselineKind::WeightedLogprob: return annotate_weighted_logprob(task, env, seed);
        case BaselineKind::ArenaHardStyle: return annotate_arena_hard(task, env, seed);
    }
    throw error("unknown baseline kind");
}

}  // namespace arbiter
