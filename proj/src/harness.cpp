#include "arbiter/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

namespace arbiter {

namespace {

std::vector<std::int64_t> unique_sorted_seeds(const RunConfig& config) {
    std::vector<std::int64_t> seeds = config.seeds;
    std::sort(seeds.begin(), seeds.end());
    seeds.erase(std::unique(seeds.begin(), seeds.end()), seeds.end());
    if (seeds.empty()) throw error("run needs at least one seed");
    return seeds;
}

std::string format4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

}  // namespace

void save_run_result(const std::string& path, const RunResult& result) {
    json rows = json::array();
    for (const auto& [seed, item_id, outcome] : result.outcomes)
        rows.push_back({{"seed", seed}, {"item_id", item_id}, {"outcome", outcome}});
    json j{{"config", result.config},
           {"dataset_digest", result.dataset_digest},
           {"prompt_digests", result.prompt_digests},
           {"outcomes", rows}};
    std::ofstream out(path);
    if (!out) throw error("cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw error("write failed for " + path);
}

RunResult load_run_result(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open " + path);
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw error(path + ": " + e.what());
    }
    RunResult result;
    j.at("config").get_to(result.config);
    j.at("dataset_digest").get_to(result.dataset_digest);
    result.prompt_digests =
        j.value("prompt_digests", std::map<std::string, std::string>{});
    for (const auto& row : j.at("outcomes"))
        result.outcomes.emplace_back(row.at("seed").get<std::int64_t>(),
                                     row.at("item_id").get<std::string>(),
                                     row.at("outcome").get<PreferenceOutcome>());
    return result;
}

std::pair<PairwiseTask, PreferenceLabel> apply_order_policy(const DatasetItem& item,
                                                            OrderPolicy policy) {
    if (policy == OrderPolicy::AsGiven) return {item.task, item.gold};
    PairwiseTask swapped = item.task;
    std::swap(swapped.text_a, swapped.text_b);
    PreferenceLabel gold = item.gold == PreferenceLabel::PreferA ? PreferenceLabel::PreferB
                                                                 : PreferenceLabel::PreferA;
    return {swapped, gold};
}

RunResult run(const std::vector<DatasetItem>& dataset, const AnnotatorFn& annotate,
              const RunConfig& config) {
    if (!annotate) throw error("run needs an annotator");
    if (config.max_parallel < 1) throw error("max_parallel must be positive");
    std::vector<std::int64_t> seeds = unique_sorted_seeds(config);

    std::vector<const DatasetItem*> items;
    items.reserve(dataset.size());
    for (const auto& item : dataset) items.push_back(&item);
    std::sort(items.begin(), items.end(),
              [](const DatasetItem* a, const DatasetItem* b) { return a->task.id < b->task.id; });

    struct Cell {
        std::int64_t seed;
        const DatasetItem* item;
    };
    std::vector<Cell> cells;
    for (std::int64_t seed : seeds)
        for (const DatasetItem* item : items) cells.push_back({seed, item});

    std::vector<PreferenceOutcome> results(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const Cell& cell = cells[i];
            try {
                auto [task, gold] = apply_order_policy(*cell.item, config.order_policy);
                (void)gold;
                results[i] = annotate(task, cell.seed);
            } catch (const std::exception& e) {
                PreferenceOutcome failed;
                failed.label = PreferenceLabel::NotAvailable;
                failed.reasoning = std::string("annotation failed: ") + e.what();
                results[i] = std::move(failed);
            }
        }
    };

    std::size_t thread_count =
        std::min<std::size_t>(static_cast<std::size_t>(config.max_parallel), cells.size());
    if (thread_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        threads.reserve(thread_count);
        for (std::size_t t = 0; t < thread_count; ++t) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }

    RunResult result;
    result.config = config;
    for (std::size_t i = 0; i < cells.size(); ++i)
        result.outcomes.emplace_back(cells[i].seed, cells[i].item->task.id,
                                     std::move(results[i]));
    return result;
}

AgreementStats compute_agreement(const RunResult& result, const std::vector<DatasetItem>& dataset,
                                 TiePolicy tie_policy) {
    if (dataset.empty()) throw error("agreement needs a non-empty dataset");
    std::vector<std::int64_t> seeds = unique_sorted_seeds(result.config);

    std::map<std::pair<std::int64_t, std::string>, const PreferenceOutcome*> grid;
    for (const auto& [seed, item_id, outcome] : result.outcomes)
        grid[{seed, item_id}] = &outcome;

    AgreementStats stats;
    std::size_t ties = 0, not_available = 0, reverted = 0;
    const double n = static_cast<double>(dataset.size());

    for (std::int64_t seed : seeds) {
        double credit = 0.0;
        for (const auto& item : dataset) {
            auto it = grid.find({seed, item.task.id});
            if (it == grid.end())
                throw incomplete_grid_error("missing outcome for seed " + std::to_string(seed) +
                                            ", item '" + item.task.id + "'");
            const PreferenceOutcome& outcome = *it->second;
            auto [task, gold] = apply_order_policy(item, result.config.order_policy);
            (void)task;
            if (outcome.label == gold)
                credit += 1.0;
            else if (outcome.label == PreferenceLabel::Tie && tie_policy == TiePolicy::TieHalfCredit)
                credit += 0.5;

            if (outcome.label == PreferenceLabel::Tie) ++ties;
            if (outcome.label == PreferenceLabel::NotAvailable) ++not_available;
            if (outcome.source == OutcomeSource::RevertedToBaseline) ++reverted;
        }
        stats.per_seed_agreement.push_back(credit / n);
    }

    for (double a : stats.per_seed_agreement) stats.mean_agreement += a;
    stats.mean_agreement /= static_cast<double>(stats.per_seed_agreement.size());
    double variance = 0.0;
    for (double a : stats.per_seed_agreement) {
        double d = a - stats.mean_agreement;
        variance += d * d;
    }
    variance /= static_cast<double>(stats.per_seed_agreement.size());
    stats.std_dev = std::sqrt(variance);

    const double grid_size = n * static_cast<double>(seeds.size());
    stats.tie_rate = static_cast<double>(ties) / grid_size;
    stats.not_available_rate = static_cast<double>(not_available) / grid_size;
    stats.revert_rate = static_cast<double>(reverted) / grid_size;
    return stats;
}

namespace {

void sort_rows(std::vector<ReportRow>& rows) {
    std::sort(rows.begin(), rows.end(), [](const ReportRow& a, const ReportRow& b) {
        return std::tie(a.dataset, a.annotator) < std::tie(b.dataset, b.annotator);
    });
}

}  // namespace

std::string render_report_csv(std::vector<ReportRow> rows) {
    sort_rows(rows);
    std::string out = "dataset,annotator,mean,std,tie_rate,not_available_rate,revert_rate\n";
    for (const auto& row : rows) {
        out += row.dataset + "," + row.annotator + "," + format4(row.stats.mean_agreement) + "," +
               format4(row.stats.std_dev) + "," + format4(row.stats.tie_rate) + "," +
               format4(row.stats.not_available_rate) + "," + format4(row.stats.revert_rate) + "\n";
    }
    return out;
}

std::string render_report_markdown(std::vector<ReportRow> rows) {
    sort_rows(rows);
    std::string out =
        "| dataset | annotator | mean | std | tie_rate | not_available_rate | revert_rate |\n"
        "|---|---|---|---|---|---|---|\n";
    for (const auto& row : rows) {
        out += "| " + row.dataset + " | " + row.annotator + " | " +
               format4(row.stats.mean_agreement) + " | " + format4(row.stats.std_dev) + " | " +
               format4(row.stats.tie_rate) + " | " + format4(row.stats.not_available_rate) +
               " | " + format4(row.stats.revert_rate) + " |\n";
    }
    return out;
}

}  // namespace arbiter
