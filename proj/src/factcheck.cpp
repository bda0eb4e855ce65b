#include "arbiter/factcheck.hpp"

namespace arbiter {

const char* const kFactCheckToolId = "fact_check";

namespace {

constexpr const char* kSupportedPrefix = "✅ ";    // white heavy check mark
constexpr const char* kUnsupportedPrefix = "❌ ";  // cross mark

const char* kConfidenceDescription =
    "Confidence that a websearch will help "
    "correctly select the better response. "
    "Integer between 0 (won't help) and 5 "
    "(will with absolute certainty help), 3 "
    "would mean 'may help'."
    "Consider whether there are facts present in "
    "either response, and if (!) consider whether "
    "these facts can be checked in a websearch. "
    "For example a word count task can't be checked "
    "with a websearch, but the birthday of a celebrity "
    "may be checked. "
    "Remember that websearches do not help on maths problems.";

OutputSchema atomic_facts_schema() {
    return OutputSchema{
        "AtomicFacts",
        {SchemaField{"atomic_facts", "A list of separate individual facts.",
                     FieldKind::StringList,
                     {}}}};
}

OutputSchema self_contained_schema() {
    return OutputSchema{
        "SelfContainedFact",
        {SchemaField{"self_contained_fact",
                     "A self-contained fact that does not require external information to be "
                     "understood. Do not add additional information that is not needed.",
                     FieldKind::String,
                     {}}}};
}

OutputSchema fact_verdict_schema() {
    return OutputSchema{
        "FactCheckingResult",
        {SchemaField{"reasoning",
                     "A short justification for the truthfulness verdict. Max three sentences.",
                     FieldKind::String,
                     {}},
         SchemaField{"truthful", "Whether or not the fact is truthful. Must be true or false.",
                     FieldKind::Boolean,
                     {}}}};
}

OutputSchema evidence_check_schema() {
    return OutputSchema{
        "EvidenceCheck",
        {SchemaField{"sufficient",
                     "Whether the search results gathered so far are sufficient to judge the "
                     "statement.",
                     FieldKind::Boolean,
                     {}},
         SchemaField{"followup_query",
                     "Next web search query to run when more evidence is needed. Empty string "
                     "when sufficient.",
                     FieldKind::String,
                     {}}}};
}

std::string render_results(const std::vector<SearchResult>& results) {
    std::string out;
    for (const auto& r : results) {
        if (!out.empty()) out += '\n';
        out += "- " + r.title + ": " + r.snippet + " [" + r.url + "]";
    }
    return out;
}

}  // namespace

FactAssessmentAnswers FactAssessmentAnswers::from_record(const json& record) {
    FactAssessmentAnswers a;
    a.contains_facts = record.at("contains_facts").get<bool>();
    a.is_like_wiki = record.at("is_like_wiki").get<bool>();
    a.is_maths = record.at("is_maths").get<bool>();
    a.is_wordcount = record.at("is_wordcount").get<bool>();
    a.confidence_websearch_will_help = record.at("confidence_websearch_will_help").get<int>();
    return a;
}

OutputSchema fact_assessment_schema() {
    return OutputSchema{
        "TextAssessment",
        {SchemaField{"contains_facts",
                     "Whether the text contains any facts that may be checked using a web search.",
                     FieldKind::Boolean,
                     {}},
         SchemaField{"is_like_wiki", "Whether the response text could be from a wiki page.",
                     FieldKind::Boolean,
                     {}},
         SchemaField{"is_maths", "Whether the text is a solution to any kind of maths problem.",
                     FieldKind::Boolean,
                     {}},
         SchemaField{"is_wordcount", "Whether the text is providing a word count.",
                     FieldKind::Boolean,
                     {}},
         SchemaField{"confidence_websearch_will_help", kConfidenceDescription,
                     FieldKind::Integer,
                     {}}}};
}

bool fact_routing_rule(const FactAssessmentAnswers& a) {
    return a.contains_facts && !a.is_maths && !a.is_wordcount &&
           a.confidence_websearch_will_help >= 3;
}

bool fact_routing_rule(const json& record) {
    return fact_routing_rule(FactAssessmentAnswers::from_record(record));
}

void FactCheckEnv::check() const {
    if (!gateway) throw error("fact tool needs a gateway");
    if (!search) throw error("fact tool needs a search client");
    if (config.max_searches_per_fact < 1) throw error("max_searches_per_fact must be >= 1");
    if (config.max_results_per_search < 1) throw error("max_results_per_search must be >= 1");
}

std::vector<std::string> extract_atomic_facts(const std::string& text,
                                              const std::string& task_prompt,
                                              const FactCheckEnv& env) {
    (void)task_prompt;  // extraction looks at the response text alone
    ChatRequest req;
    req.user = "Break down the following statement into separate individual facts:\n\n" + text +
               "\n  Ignore things that cannot be verified in a web search.";
    req.schema = atomic_facts_schema();
    req.model_tag = env.model_tag;
    req.seed = env.seed;
    StructuredResult res = env.gateway->complete_structured(req);
    return res.record.at("atomic_facts").get<std::vector<std::string>>();
}

std::string make_self_contained(const std::string& fact, const std::string& response_text,
                                const std::string& task_prompt, const FactCheckEnv& env,
                                bool* degraded) {
    ChatRequest req;
    req.user = "We have a response text for the following prior conversation:\n" + task_prompt +
               "\n\nYou are given the following response context:\n\n" + response_text +
               "\n\nUse this context to make the following statement self-contained (if "
               "necessary, otherwise return unchanged):" +
               fact;
    req.schema = self_contained_schema();
    req.model_tag = env.model_tag;
    req.seed = env.seed;
    try {
        StructuredResult res = env.gateway->complete_structured(req);
        return res.record.at("self_contained_fact").get<std::string>();
    } catch (const malformed_output_error&) {
        if (degraded) *degraded = true;
        return fact;
    }
}

FactVerdict check_fact(const std::string& fact, const FactCheckEnv& env) {
    env.check();
    FactVerdict verdict;
    std::vector<SearchResult> evidence;

    auto run_search = [&](const std::string& query) -> bool {
        ++verdict.searches_used;
        try {
            auto found = env.search->search({query, env.config.max_results_per_search});
            evidence.insert(evidence.end(), found.begin(), found.end());
            return true;
        } catch (const search_unavailable_error&) {
            return false;
        }
    };

    // First query is the fact itself; the model may then ask for more
    // evidence until the per-fact budget is spent.
    bool first_ok = run_search(fact);
    if (!first_ok && evidence.empty()) {
        verdict.truthful = false;
        verdict.reasoning = "no evidence retrievable";
        verdict.degraded = true;
        return verdict;
    }

    while (verdict.searches_used < env.config.max_searches_per_fact) {
        ChatRequest ask;
        ask.user = "You are verifying the statement: " + fact +
                   "\n\nSearch results so far:\n```\n" + render_results(evidence) +
                   "\n```\nDecide whether these results are sufficient to judge the statement. "
                   "If they are not sufficient, provide one focused follow-up web search query.";
        ask.schema = evidence_check_schema();
        ask.model_tag = env.model_tag;
        ask.seed = env.seed;

        bool sufficient = true;
        std::string followup;
        try {
            StructuredResult res = env.gateway->complete_structured(ask);
            sufficient = res.record.at("sufficient").get<bool>();
            followup = res.record.at("followup_query").get<std::string>();
        } catch (const malformed_output_error&) {
            break;  // stop gathering; judge on what we have
        }
        if (sufficient || followup.empty()) break;
        if (!run_search(followup) && evidence.empty()) {
            verdict.truthful = false;
            verdict.reasoning = "no evidence retrievable";
            verdict.degraded = true;
            return verdict;
        }
    }

    ChatRequest judge;
    judge.user = "You have the following statement: " + fact +
                 "\n\nYou also have the following web search results:\n```\n" +
                 render_results(evidence) +
                 "\n```Is the truthfulness of the statement supported by these search results? "
                 "Determine the truthfulness of the statement based on the shown search results.";
    judge.schema = fact_verdict_schema();
    judge.model_tag = env.model_tag;
    judge.seed = env.seed;
    try {
        StructuredResult res = env.gateway->complete_structured(judge);
        verdict.truthful = res.record.at("truthful").get<bool>();
        verdict.reasoning = res.record.at("reasoning").get<std::string>();
    } catch (const malformed_output_error&) {
        verdict.truthful = false;
        verdict.reasoning = "no evidence retrievable";
        verdict.degraded = true;
    }
    return verdict;
}

std::vector<std::string> render_fact_report(const std::vector<AtomicFact>& facts) {
    std::vector<std::string> lines;
    lines.reserve(facts.size());
    for (const auto& f : facts) {
        bool supported = f.truthful.value_or(false);
        lines.push_back((supported ? kSupportedPrefix : kUnsupportedPrefix) + f.self_contained);
    }
    return lines;
}

int count_supported(const std::vector<std::string>& lines) {
    int n = 0;
    for (const auto& line : lines)
        if (line.rfind(kSupportedPrefix, 0) == 0) ++n;
    return n;
}

ToolReport run_fact_tool(const PairwiseTask& task, Side side, const FactCheckEnv& env) {
    env.check();
    ToolReport report;
    report.tool_id = kFactCheckToolId;

    const std::string& text = task.text(side);
    std::vector<std::string> raw_facts;
    try {
        raw_facts = extract_atomic_facts(text, task.prompt, env);
    } catch (const malformed_output_error& e) {
        report.ok = false;
        report.failure_reason = std::string("fact extraction failed: ") + e.what();
        return report;
    }

    std::vector<AtomicFact> facts;
    facts.reserve(raw_facts.size());
    for (const auto& raw : raw_facts) {
        AtomicFact fact;
        fact.raw = raw;
        fact.self_contained = make_self_contained(raw, text, task.prompt, env, &fact.degraded);
        FactVerdict verdict = check_fact(fact.self_contained, env);
        fact.truthful = verdict.truthful;
        fact.verdict_reasoning = verdict.reasoning;
        fact.searches_used = verdict.searches_used;
        fact.degraded = fact.degraded || verdict.degraded;
        facts.push_back(std::move(fact));
    }

    std::vector<std::string> lines = render_fact_report(facts);
    int supported = count_supported(lines);
    report.output = json{{"lines", lines},
                         {"supported_count", supported},
                         {"unsupported_count", static_cast<int>(lines.size()) - supported}};
    return report;
}

}  // namespace arbiter
