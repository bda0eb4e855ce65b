#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "arbiter/core.hpp"

namespace arbiter {

struct SearchQuery {
    std::string text;
    int max_results = 5;

    void check() const;
};

struct SearchResult {
    std::string title;
    std::string snippet;
    std::string url;

    bool operator==(const SearchResult&) const = default;
};

void to_json(json& j, const SearchResult& v);
void from_json(const json& j, SearchResult& v);

struct search_unavailable_error : error {
    using error::error;
};

/// Fixture key normalization: model-generated queries vary trivially between
/// runs, so keys are lowercased with whitespace runs collapsed.
std::string normalize_query(const std::string& q);

class SearchClient {
  public:
    virtual ~SearchClient() = default;
    virtual std::vector<SearchResult> search(const SearchQuery& q) = 0;
    /// Number of search() invocations served (budget assertions in tests).
    virtual std::uint64_t call_count() const = 0;
};

using SearchFixture = std::map<std::string, std::vector<SearchResult>>;

/// JSONL of {"query": ..., "results": [...]}; keys stored normalized.
SearchFixture load_search_fixture(const std::filesystem::path& path);
void append_search_fixture(const std::filesystem::path& path, const std::string& normalized_query,
                           const std::vector<SearchResult>& results);

/// Read-only fixture playback; performs no I/O after construction and no
/// network operations ever. A miss raises search_unavailable_error.
class ReplaySearchClient : public SearchClient {
  public:
    explicit ReplaySearchClient(const std::filesystem::path& fixture_path);
    explicit ReplaySearchClient(SearchFixture fixture);

    std::vector<SearchResult> search(const SearchQuery& q) override;
    std::uint64_t call_count() const override { return calls_; }

  private:
    SearchFixture fixture_;
    std::atomic<std::uint64_t> calls_{0};
};

/// Provider adapter config: any JSON search API returning a result array can
/// back live mode by naming the array and its fields.
struct LiveSearchConfig {
    std::string endpoint;  // full URL; the query is appended as a parameter
    std::string query_param = "q";
    std::optional<std::string> auth_env;
    std::string results_field = "results";
    std::string title_field = "title";
    std::string snippet_field = "snippet";
    std::string url_field = "url";
    double requests_per_second = 2.0;
    int max_attempts = 3;

    void check() const;
};

class LiveSearchClient : public SearchClient {
  public:
    explicit LiveSearchClient(LiveSearchConfig config);

    std::vector<SearchResult> search(const SearchQuery& q) override;
    std::uint64_t call_count() const override { return calls_; }

  private:
    void rate_limit();

    LiveSearchConfig config_;
    std::atomic<std::uint64_t> calls_{0};
    std::mutex pace_mutex_;
    std::chrono::steady_clock::time_point last_request_{};
};

/// Serves from the fixture when the normalized query is present, otherwise
/// calls the upstream client and appends the answer to the fixture file.
class RecordSearchClient : public SearchClient {
  public:
    RecordSearchClient(std::shared_ptr<SearchClient> upstream,
                       std::filesystem::path fixture_path);

    std::vector<SearchResult> search(const SearchQuery& q) override;
    std::uint64_t call_count() const override { return calls_; }

  private:
    std::shared_ptr<SearchClient> upstream_;
    std::filesystem::path fixture_path_;
    SearchFixture fixture_;
    std::mutex mutex_;
    std::atomic<std::uint64_t> calls_{0};
};

/// Client for runs configured without any search source: every query reports
/// search_unavailable_error, which the fact tool resolves fail-conservatively.
class UnavailableSearchClient : public SearchClient {
  public:
    std::vector<SearchResult> search(const SearchQuery& q) override;
    std::uint64_t call_count() const override { return calls_; }

  private:
    std::atomic<std::uint64_t> calls_{0};
};

}  // namespace arbiter
