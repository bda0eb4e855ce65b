#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "arbiter/annotator.hpp"
#include "arbiter/core.hpp"

namespace arbiter {

struct incomplete_grid_error : error {
    using error::error;
};

/// A full (seed × item) grid of annotator verdicts plus everything needed to
/// reproduce it.
struct RunResult {
    RunConfig config;
    std::string dataset_digest;
    /// Prompt-asset content hashes keyed by prompt id, for the run manifest.
    std::map<std::string, std::string> prompt_digests;
    /// Ordered by (seed, item_id): the deterministic fold order.
    std::vector<std::tuple<std::int64_t, std::string, PreferenceOutcome>> outcomes;
};

void save_run_result(const std::string& path, const RunResult& result);
RunResult load_run_result(const std::string& path);

struct AgreementStats {
    double mean_agreement = 0.0;
    std::vector<double> per_seed_agreement;
    double std_dev = 0.0;
    double tie_rate = 0.0;
    double not_available_rate = 0.0;
    double revert_rate = 0.0;
};

// Returns the task to annotate and the gold label to score against after the
// order policy is applied. SwapAB exchanges text_a/text_b and inverts gold, so
// run() and compute_agreement() can both start from the original dataset.
std::pair<PairwiseTask, PreferenceLabel> apply_order_policy(const DatasetItem& item,
                                                            OrderPolicy policy);

// Executes the annotator over every (seed, item) cell with a bounded worker
// pool. A cell that throws becomes a NotAvailable outcome carrying the error
// text; the run itself never aborts. Output order is (seed, item_id),
// independent of scheduling.
RunResult run(const std::vector<DatasetItem>& dataset, const AnnotatorFn& annotate,
              const RunConfig& config);

// Per-seed agreement = (matches + tie_credit) / N. TieCountsWrong scores ties
// and NotAvailable zero; TieHalfCredit scores ties 0.5. Rates are over the full
// grid. Throws incomplete_grid_error if any (seed, item) cell is missing.
AgreementStats compute_agreement(const RunResult& result, const std::vector<DatasetItem>& dataset,
                                 TiePolicy tie_policy);

struct ReportRow {
    std::string dataset;
    std::string annotator;
    AgreementStats stats;
};

// CSV with a fixed header and markdown with the same columns; rows sorted by
// (dataset, annotator); all reals printed with 4 decimal places.
std::string render_report_csv(std::vector<ReportRow> rows);
std::string render_report_markdown(std::vector<ReportRow> rows);

}  // namespace arbiter
