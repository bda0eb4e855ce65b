#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "arbiter/core.hpp"

namespace arbiter {

// Canonical on-disk form: JSONL, one object per line with
// {id, prompt, text_a, text_b, gold: "a"|"b", subset_tag}.
// Malformed lines, duplicate ids, and bad gold values are aggregated into one
// error message with line numbers so a bad file is diagnosed in a single pass.
std::vector<DatasetItem> load_pairwise(const std::string& path);
void write_pairwise(const std::string& path, const std::vector<DatasetItem>& items);

// sha256 over the canonical JSONL serialization; stable across load/save round trips.
std::string dataset_digest(const std::vector<DatasetItem>& items);

// A problem with labeled candidate solutions, the raw material for building pairs.
struct SolutionPool {
    std::string problem_id;
    std::string prompt;
    std::vector<std::string> correct_solutions;
    std::vector<std::string> incorrect_solutions;
};

std::vector<SolutionPool> load_solution_pools(const std::string& path);

struct BuildOutcome {
    std::vector<DatasetItem> items;
    std::vector<std::string> warnings;  // one per skipped pool
};

// One pair per problem: the first correct solution against an incorrect solution
// chosen uniformly by a per-problem keyed RNG; the same RNG flips which slot the
// correct solution lands in, so gold is 'a' about half the time. Pools missing a
// correct or incorrect solution are skipped with a warning rather than failing
// the whole build.
BuildOutcome build_pairs(const std::vector<SolutionPool>& pools, std::int64_t seed,
                         const std::string& subset_tag = {});

struct AuditReport {
    std::vector<std::string> flagged_ids;
    std::size_t clean_count = 0;
    std::vector<std::string> warnings;  // known-bad ids absent from the dataset
};

// Flags items whose ids appear in a curated known-bad list.
AuditReport audit_known_bad(const std::vector<DatasetItem>& items,
                            const std::vector<std::string>& known_bad_ids);

// Converts reward-model preference JSONL ({prompt, chosen, rejected, id?, subset?})
// into the canonical form, randomizing slot order per item.
BuildOutcome convert_preference_pairs(const std::string& path, std::int64_t seed);

// Joins a gold-answer file ({id, question, answer}) with a model-failure file
// ({id, answer}) into pairs: gold answer vs. the failing answer for the same id.
// Failure ids without a gold entry are skipped with a warning.
BuildOutcome convert_graded_failures(const std::string& gold_path,
                                     const std::string& failures_path, std::int64_t seed,
                                     const std::string& subset_tag = {});

}  // namespace arbiter
