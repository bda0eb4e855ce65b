#include "arbiter/datasets.hpp"

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "arbiter/digest.hpp"

namespace arbiter {

namespace {

// Reads non-empty lines, handing each to `consume(line_number, parsed)` and
// collecting per-line failures into one aggregated error.
template <typename Fn>
void for_each_jsonl_line(const std::string& path, Fn consume) {
    std::ifstream in(path);
    if (!in) throw error("cannot open " + path);

    std::vector<std::string> problems;
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            consume(line_number, json::parse(line));
        } catch (const std::exception& e) {
            problems.push_back("line " + std::to_string(line_number) + ": " + e.what());
        }
    }
    if (!problems.empty()) {
        std::string message = path + ": " + std::to_string(problems.size()) + " bad line(s)";
        for (const auto& p : problems) message += "\n  " + p;
        throw error(message);
    }
}

}  // namespace

std::vector<DatasetItem> load_pairwise(const std::string& path) {
    std::vector<DatasetItem> items;
    std::set<std::string> seen_ids;
    for_each_jsonl_line(path, [&](std::size_t, const json& j) {
        DatasetItem item = j.get<DatasetItem>();
        if (item.task.id.empty()) throw error("empty id");
        if (!seen_ids.insert(item.task.id).second)
            throw error("duplicate id '" + item.task.id + "'");
        items.push_back(std::move(item));
    });
    return items;
}

void write_pairwise(const std::string& path, const std::vector<DatasetItem>& items) {
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    for (const auto& item : items) out << json(item).dump() << "\n";
    if (!out) throw error("write failed for " + path);
}

std::string dataset_digest(const std::vector<DatasetItem>& items) {
    std::string canonical;
    for (const auto& item : items) {
        canonical += json(item).dump();
        canonical += "\n";
    }
    return sha256_hex(canonical);
}

std::vector<SolutionPool> load_solution_pools(const std::string& path) {
    std::vector<SolutionPool> pools;
    std::set<std::string> seen_ids;
    for_each_jsonl_line(path, [&](std::size_t, const json& j) {
        SolutionPool pool;
        j.at("problem_id").get_to(pool.problem_id);
        j.at("prompt").get_to(pool.prompt);
        j.at("correct_solutions").get_to(pool.correct_solutions);
        j.at("incorrect_solutions").get_to(pool.incorrect_solutions);
        if (pool.problem_id.empty()) throw error("empty problem_id");
        if (!seen_ids.insert(pool.problem_id).second)
            throw error("duplicate problem_id '" + pool.problem_id + "'");
        pools.push_back(std::move(pool));
    });
    return pools;
}

BuildOutcome build_pairs(const std::vector<SolutionPool>& pools, std::int64_t seed,
                         const std::string& subset_tag) {
    BuildOutcome out;
    for (const auto& pool : pools) {
        if (pool.correct_solutions.empty() || pool.incorrect_solutions.empty()) {
            out.warnings.push_back("skipped '" + pool.problem_id +
                                   "': needs at least one correct and one incorrect solution");
            continue;
        }
        SplitMix64 rng = keyed_generator(seed, pool.problem_id);
        const std::string& correct = pool.correct_solutions.front();
        const std::string& incorrect =
            pool.incorrect_solutions[rng.next() % pool.incorrect_solutions.size()];
        bool correct_in_a = rng.next_unit() < 0.5;

        DatasetItem item;
        item.task.id = pool.problem_id;
        item.task.prompt = pool.prompt;
        item.task.text_a = correct_in_a ? correct : incorrect;
        item.task.text_b = correct_in_a ? incorrect : correct;
        item.gold = correct_in_a ? PreferenceLabel::PreferA : PreferenceLabel::PreferB;
        item.subset_tag = subset_tag;
        out.items.push_back(std::move(item));
    }
    return out;
}

AuditReport audit_known_bad(const std::vector<DatasetItem>& items,
                            const std::vector<std::string>& known_bad_ids) {
    std::set<std::string> bad(known_bad_ids.begin(), known_bad_ids.end());
    std::set<std::string> present;
    AuditReport report;
    for (const auto& item : items) {
        present.insert(item.task.id);
        if (bad.count(item.task.id))
            report.flagged_ids.push_back(item.task.id);
        else
            ++report.clean_count;
    }
    for (const auto& id : known_bad_ids)
        if (!present.count(id))
            report.warnings.push_back("known-bad id '" + id + "' not in dataset");
    return report;
}

BuildOutcome convert_preference_pairs(const std::string& path, std::int64_t seed) {
    std::vector<SolutionPool> pools;
    std::size_t anonymous = 0;
    std::vector<std::string> subset_tags;
    for_each_jsonl_line(path, [&](std::size_t line_number, const json& j) {
        SolutionPool pool;
        pool.prompt = j.at("prompt").get<std::string>();
        pool.correct_solutions.push_back(j.at("chosen").get<std::string>());
        pool.incorrect_solutions.push_back(j.at("rejected").get<std::string>());
        pool.problem_id = j.value("id", std::string{});
        if (pool.problem_id.empty()) {
            pool.problem_id = "item-" + std::to_string(++anonymous);
        }
        (void)line_number;
        subset_tags.push_back(j.value("subset", std::string{}));
        pools.push_back(std::move(pool));
    });
    BuildOutcome out = build_pairs(pools, seed);
    // build_pairs keeps pool order, so tags line up positionally.
    for (std::size_t i = 0; i < out.items.size() && i < subset_tags.size(); ++i)
        out.items[i].subset_tag = subset_tags[i];
    return out;
}

BuildOutcome convert_graded_failures(const std::string& gold_path,
                                     const std::string& failures_path, std::int64_t seed,
                                     const std::string& subset_tag) {
    struct GoldEntry {
        std::string question;
        std::string answer;
    };
    std::map<std::string, GoldEntry> gold;
    for_each_jsonl_line(gold_path, [&](std::size_t, const json& j) {
        gold[j.at("id").get<std::string>()] = {j.at("question").get<std::string>(),
                                               j.at("answer").get<std::string>()};
    });

    std::vector<SolutionPool> pools;
    std::vector<std::string> orphan_warnings;
    std::set<std::string> seen_ids;
    for_each_jsonl_line(failures_path, [&](std::size_t, const json& j) {
        std::string id = j.at("id").get<std::string>();
        if (!seen_ids.insert(id).second) throw error("duplicate failure id '" + id + "'");
        auto it = gold.find(id);
        if (it == gold.end()) {
            orphan_warnings.push_back("skipped failure '" + id + "': no gold entry");
            return;
        }
        SolutionPool pool;
        pool.problem_id = id;
        pool.prompt = it->second.question;
        pool.correct_solutions.push_back(it->second.answer);
        pool.incorrect_solutions.push_back(j.at("answer").get<std::string>());
        pools.push_back(std::move(pool));
    });

    BuildOutcome out = build_pairs(pools, seed, subset_tag);
    out.warnings.insert(out.warnings.end(), orphan_warnings.begin(), orphan_warnings.end());
    return out;
}

}  // namespace arbiter
