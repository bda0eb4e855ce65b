#include "arbiter/search.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <thread>

#include "httplib.h"

#include "arbiter/net_guard.hpp"

namespace arbiter {

void SearchQuery::check() const {
    if (text.empty()) throw error("search query must be non-empty");
    if (max_results < 1) throw error("max_results must be positive");
}

void to_json(json& j, const SearchResult& v) {
    j = json{{"title", v.title}, {"snippet", v.snippet}, {"url", v.url}};
}

void from_json(const json& j, SearchResult& v) {
    j.at("title").get_to(v.title);
    v.snippet = j.value("snippet", std::string{});
    j.at("url").get_to(v.url);
}

std::string normalize_query(const std::string& q) {
    std::string out;
    out.reserve(q.size());
    bool pending_space = false;
    for (unsigned char c : q) {
        if (std::isspace(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out += static_cast<char>(std::tolower(c));
    }
    return out;
}

SearchFixture load_search_fixture(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw error("cannot open search fixture: " + path.string());
    SearchFixture fixture;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
            std::vector<SearchResult> results = j.at("results").get<std::vector<SearchResult>>();
            // Later entries win so re-recorded queries supersede stale ones.
            fixture[normalize_query(j.at("query").get<std::string>())] = std::move(results);
        } catch (const json::exception& e) {
            throw error("search fixture " + path.string() + ":" + std::to_string(line_no) + ": " +
                        e.what());
        }
    }
    return fixture;
}

void append_search_fixture(const std::filesystem::path& path, const std::string& normalized_query,
                           const std::vector<SearchResult>& results) {
    std::ofstream out(path, std::ios::app);
    if (!out) throw error("cannot append to search fixture: " + path.string());
    out << json{{"query", normalized_query}, {"results", results}}.dump() << '\n';
}

// ---------------------------------------------------------------------------
// Replay

ReplaySearchClient::ReplaySearchClient(const std::filesystem::path& fixture_path)
    : fixture_(load_search_fixture(fixture_path)) {}

ReplaySearchClient::ReplaySearchClient(SearchFixture fixture) : fixture_(std::move(fixture)) {}

std::vector<SearchResult> ReplaySearchClient::search(const SearchQuery& q) {
    q.check();
    calls_.fetch_add(1);
    auto it = fixture_.find(normalize_query(q.text));
    if (it == fixture_.end())
        throw search_unavailable_error("no fixture entry for query: \"" + normalize_query(q.text) +
                                       "\"");
    return it->second;
}

// ---------------------------------------------------------------------------
// Live

void LiveSearchConfig::check() const {
    if (endpoint.empty()) throw error("live search needs an endpoint");
    if (requests_per_second <= 0) throw error("requests_per_second must be positive");
    if (max_attempts < 1) throw error("max_attempts must be >= 1");
}

LiveSearchClient::LiveSearchClient(LiveSearchConfig config) : config_(std::move(config)) {
    config_.check();
}

void LiveSearchClient::rate_limit() {
    std::lock_guard<std::mutex> lock(pace_mutex_);
    auto now = std::chrono::steady_clock::now();
    auto min_gap = std::chrono::microseconds(
        static_cast<std::int64_t>(1e6 / config_.requests_per_second));
    if (last_request_.time_since_epoch().count() != 0 && now - last_request_ < min_gap)
        std::this_thread::sleep_for(min_gap - (now - last_request_));
    last_request_ = std::chrono::steady_clock::now();
}

namespace {

std::string url_encode(const std::string& s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 0xF];
        }
    }
    return out;
}

struct SplitUrl {
    std::string base;
    std::string path;
};

SplitUrl split_search_url(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw error("endpoint must include a scheme: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

std::vector<SearchResult> LiveSearchClient::search(const SearchQuery& q) {
    q.check();
    calls_.fetch_add(1);

    std::string last_failure;
    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
        rate_limit();
        net_guard::record_network_attempt();

        SplitUrl url = split_search_url(config_.endpoint);
        std::string sep = url.path.find('?') == std::string::npos ? "?" : "&";
        std::string path = url.path + sep + config_.query_param + "=" + url_encode(q.text);

        httplib::Headers headers;
        if (config_.auth_env) {
            const char* key = std::getenv(config_.auth_env->c_str());
            if (!key || !*key)
                throw search_unavailable_error("auth environment variable " + *config_.auth_env +
                                               " is not set");
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        httplib::Client client(url.base);
        client.set_connection_timeout(15);
        client.set_read_timeout(30);
        auto result = client.Get(path, headers);
        if (!result) {
            last_failure = "no response: " + to_string(result.error());
            continue;
        }
        if (result->status != 200) {
            last_failure = "status " + std::to_string(result->status);
            if (result->status == 429 || result->status >= 500) continue;
            break;
        }
        try {
            json payload = json::parse(result->body);
            std::vector<SearchResult> out;
            for (const auto& item : payload.value(config_.results_field, json::array())) {
                SearchResult r;
                r.title = item.value(config_.title_field, std::string{});
                r.snippet = item.value(config_.snippet_field, std::string{});
                r.url = item.value(config_.url_field, std::string{});
                out.push_back(std::move(r));
                if (static_cast<int>(out.size()) >= q.max_results) break;
            }
            return out;
        } catch (const json::exception& e) {
            last_failure = std::string("unparseable provider response: ") + e.what();
            break;
        }
    }
    throw search_unavailable_error("live search failed: " + last_failure);
}

// ---------------------------------------------------------------------------
// Record

RecordSearchClient::RecordSearchClient(std::shared_ptr<SearchClient> upstream,
                                       std::filesystem::path fixture_path)
    : upstream_(std::move(upstream)), fixture_path_(std::move(fixture_path)) {
    if (!upstream_) throw error("record mode needs an upstream client");
    if (std::filesystem::exists(fixture_path_)) fixture_ = load_search_fixture(fixture_path_);
}

std::vector<SearchResult> RecordSearchClient::search(const SearchQuery& q) {
    q.check();
    calls_.fetch_add(1);
    std::string key = normalize_query(q.text);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        auto it = fixture_.find(key);
        if (it != fixture_.end()) return it->second;
    }
    std::vector<SearchResult> results = upstream_->search(q);
    if (static_cast<int>(results.size()) > q.max_results) results.resize(q.max_results);
    std::lock_guard<std::mutex> lock(mutex_);
    auto [it, inserted] = fixture_.emplace(key, results);
    if (inserted) append_search_fixture(fixture_path_, key, results);
    return it->second;
}

// ---------------------------------------------------------------------------

std::vector<SearchResult> UnavailableSearchClient::search(const SearchQuery& q) {
    q.check();
    calls_.fetch_add(1);
    throw search_unavailable_error("no search source configured");
}

}  // namespace arbiter
