#include "arbiter/prompts.hpp"

#include <fstream>
#include <sstream>

namespace arbiter {

namespace {

const char* kPickBest = R"(Select the better of the following two texts.

Text A: {text_a}

Text B: {text_b}

Both texts are a response to the following prompt: {prompt}
)";

const char* kWeightedLogprob = R"(You are comparing two responses to the same prompt. Decide which response is better.

Prompt: {prompt}

Response A: {text_a}

Response B: {text_b}

Reply with exactly one character: "A" if Response A is better or "B" if Response B is better. Output nothing else.

The better response is:)";

const char* kArenaHard = R"(Please act as an impartial judge and evaluate the quality of the responses provided by two AI assistants to the user prompt displayed below. You will be given assistant A's answer and assistant B's answer. Your job is to evaluate which assistant's answer is better.

Begin your evaluation by generating your own answer to the prompt. You must provide your own answer before judging the assistants' answers.

When evaluating the assistants' answers, compare both assistants' answers with your answer. You must identify and correct any mistakes or inaccurate information.

Then consider if the assistants' answers are helpful, relevant, and concise. Helpful means the answer correctly responds to the prompt or follows the instructions. Relevant means all parts of the response closely connect or are appropriate to what is being asked. Concise means the response is clear and not verbose or excessive.

Finally, identify any missing important information in the assistants' answers that would be beneficial to include when responding to the user prompt.

After providing your explanation, you must output only one of the following choices as your final verdict with a label:

1. Assistant A is significantly better: [[A>>B]]
2. Assistant A is slightly better: [[A>B]]
3. Tie, relatively the same: [[A=B]]
4. Assistant B is slightly better: [[B>A]]
5. Assistant B is significantly better: [[B>>A]]

Example output: "My final verdict is tie: [[A=B]]".

<|User Prompt|>
{prompt}

<|The Start of Assistant A's Answer|>
{text_a}
<|The End of Assistant A's Answer|>

<|The Start of Assistant B's Answer|>
{text_b}
<|The End of Assistant B's Answer|>
)";

}  // namespace

PromptStore PromptStore::builtin() {
    PromptStore store;
    store.templates_["pick_best"] = kPickBest;
    store.templates_["weighted_logprob"] = kWeightedLogprob;
    store.templates_["arena_hard"] = kArenaHard;
    return store;
}

void PromptStore::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw error("prompt directory does not exist: " + dir.string());
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".txt") continue;
        std::ifstream in(entry.path());
        if (!in) throw error("cannot read prompt file: " + entry.path().string());
        std::ostringstream buf;
        buf << in.rdbuf();
        templates_[entry.path().stem().string()] = buf.str();
    }
}

const std::string& PromptStore::get(const std::string& id) const {
    auto it = templates_.find(id);
    if (it == templates_.end()) throw error("unknown prompt template: " + id);
    return it->second;
}

void PromptStore::set(const std::string& id, std::string text) {
    templates_[id] = std::move(text);
}

std::string PromptStore::render(const std::string& id, const PairwiseTask& task) const {
    return render_template(get(id), {{"prompt", task.prompt},
                                     {"text_a", task.text_a},
                                     {"text_b", task.text_b}});
}

std::vector<std::string> PromptStore::ids() const {
    std::vector<std::string> out;
    for (const auto& [id, _] : templates_) out.push_back(id);
    return out;
}

std::string render_template(const std::string& tmpl,
                            const std::map<std::string, std::string>& values) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            auto close = tmpl.find('}', i + 1);
            if (close != std::string::npos) {
                auto it = values.find(tmpl.substr(i + 1, close - i - 1));
                if (it != values.end()) {
                    out += it->second;
                    i = close + 1;
                    continue;
                }
            }
        }
        out += tmpl[i++];
    }
    return out;
}

}  // namespace arbiter
