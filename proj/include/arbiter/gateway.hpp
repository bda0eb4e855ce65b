#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "arbiter/core.hpp"

namespace arbiter {

enum class FieldKind { Boolean, Integer, String, StringEnum, StringList };

std::string field_kind_to_string(FieldKind kind);

struct SchemaField {
    std::string name;
    std::string description;
    FieldKind kind = FieldKind::String;
    std::vector<std::string> enum_values;  // StringEnum only

    bool operator==(const SchemaField&) const = default;
};

/// A flat structured-output schema. Every field is required. Declaration
/// order is part of the canonical form.
struct OutputSchema {
    std::string name;
    std::vector<SchemaField> fields;

    /// JSON-Schema rendering (sent to live backends / injected into prompts).
    json to_json_schema() const;
    /// Deterministic serialization used by cache keys.
    std::string canonical() const;
    /// Throws schema_mismatch_error describing the first violation.
    /// Extra keys in `record` are ignored.
    void validate(const json& record) const;

    void check_well_formed() const;

    bool operator==(const OutputSchema&) const = default;
};

struct ChatRequest {
    std::optional<std::string> system;
    std::string user;
    std::optional<OutputSchema> schema;
    double temperature = 0.0;
    bool want_token_alternatives = false;
    std::string model_tag;
    /// Run seed, threaded through so live backends can vary per seed and the
    /// cache keeps per-seed entries apart.
    std::optional<std::int64_t> seed;

    void check() const;
};

struct TokenLogprob {
    std::string token;
    double logprob = 0.0;

    bool operator==(const TokenLogprob&) const = default;
};

struct TokenAlternatives {
    int position = 0;
    std::vector<TokenLogprob> candidates;

    bool operator==(const TokenAlternatives&) const = default;
};

struct Usage {
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;

    bool operator==(const Usage&) const = default;
};

struct ChatResponse {
    std::string text;
    /// Present when the backend itself produced a structured record (scripted
    /// mock entries with a JSON response). Validated against the request
    /// schema by the gateway.
    std::optional<json> parsed;
    std::optional<std::vector<TokenAlternatives>> token_alternatives;
    Usage usage;

    bool operator==(const ChatResponse&) const = default;
};

void to_json(json& j, const ChatResponse& v);
void from_json(const json& j, ChatResponse& v);

struct RetryPolicy {
    int max_attempts = 3;
    int backoff_initial_ms = 250;
    double backoff_factor = 2.0;
};

enum class CacheMode { Off, ReadWrite, ReadOnly };
enum class BackendKind { HttpChatApi, ScriptedMock };
enum class SchemaTransport { Native, PromptInjected };

struct BackendSpec {
    BackendKind kind = BackendKind::ScriptedMock;
    std::optional<std::string> endpoint;    // HttpChatApi only
    std::optional<std::string> auth_env;    // name of env var holding the API key
    RetryPolicy retry;
    CacheMode cache_mode = CacheMode::Off;
    std::string cache_dir;
    std::optional<std::string> script_path;  // ScriptedMock only
    SchemaTransport schema_transport = SchemaTransport::Native;
    int top_logprobs = 5;

    void check() const;
};

struct gateway_error : error {
    using error::error;
};

/// All structured-decode attempts failed to validate. Callers map this to
/// NotAvailable.
struct malformed_output_error : gateway_error {
    using gateway_error::gateway_error;
};

struct transport_error : gateway_error {
    transport_error(const std::string& msg, bool retryable_)
        : gateway_error(msg), retryable(retryable_) {}
    bool retryable = false;
};

/// A scripted mock returned a record that does not conform to the request
/// schema. That is a bug in the test script, never a runtime condition.
struct schema_violation_error : gateway_error {
    using gateway_error::gateway_error;
};

struct backend_lacks_logprobs_error : gateway_error {
    using gateway_error::gateway_error;
};

struct schema_mismatch_error : gateway_error {
    using gateway_error::gateway_error;
};

/// Single raw chat call. Implementations do no retrying or caching.
class ChatBackend {
  public:
    virtual ~ChatBackend() = default;
    virtual ChatResponse chat(const ChatRequest& req) = 0;
    /// Number of chat() calls served so far (for cache and replay tests).
    virtual std::uint64_t call_count() const = 0;
};

/// One entry of a mock script. First matching entry wins; consume-once
/// entries are skipped after they served a call.
struct MockEntry {
    std::string matcher;  // substring of the user prompt
    std::optional<json> record;
    std::optional<std::string> text;
    std::optional<std::vector<TokenLogprob>> token_alternatives;
    bool consume_once = false;
};

class ScriptedMockBackend : public ChatBackend {
  public:
    explicit ScriptedMockBackend(std::vector<MockEntry> entries);

    /// Loads a JSONL script: {"matcher": ..., "response": text-or-record,
    /// "token_alternatives": [[token, logprob], ...], "consume_once": bool}.
    static std::shared_ptr<ScriptedMockBackend> from_script_file(const std::filesystem::path& path);

    ChatResponse chat(const ChatRequest& req) override;
    std::uint64_t call_count() const override { return calls_; }

  private:
    mutable std::mutex mutex_;
    std::vector<MockEntry> entries_;
    std::vector<bool> consumed_;
    std::uint64_t calls_ = 0;
};

/// OpenAI-style chat-completions client over HTTPS.
class HttpChatBackend : public ChatBackend {
  public:
    explicit HttpChatBackend(BackendSpec spec);

    ChatResponse chat(const ChatRequest& req) override;
    std::uint64_t call_count() const override { return calls_; }

  private:
    BackendSpec spec_;
    std::atomic<std::uint64_t> calls_{0};
};

/// Directory of files named by request digest, one serialized ChatResponse per file.
class ResponseCache {
  public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<ChatResponse> get(const std::string& key) const;
    void put(const std::string& key, const ChatResponse& response);

  private:
    std::filesystem::path dir_;
    mutable std::mutex mutex_;
};

struct StructuredResult {
    json record;
    int attempts = 0;
    std::vector<std::string> raw_texts;  // each attempt's raw model text
};

class LlmGateway {
  public:
    LlmGateway(std::shared_ptr<ChatBackend> backend, const BackendSpec& spec);

    /// Structured call: parse + validate, retrying with a corrective suffix
    /// on malformed output up to retry.max_attempts.
    StructuredResult complete_structured(const ChatRequest& req);

    /// Logprob call: response carries the backend's top-k first-position
    /// alternatives. Throws backend_lacks_logprobs_error when none come back.
    ChatResponse complete_with_token_alternatives(const ChatRequest& req);

    /// Plain text call (no schema, no logprobs).
    ChatResponse complete_text(const ChatRequest& req);

    /// Deterministic digest over (model_tag, system, user, schema canonical
    /// form, temperature, want_token_alternatives, seed).
    static std::string cache_key(const ChatRequest& req);

    ChatBackend& backend() { return *backend_; }

  private:
    ChatResponse raw_call(const ChatRequest& req);
    ChatResponse call_with_transport_retry(const ChatRequest& req);

    std::shared_ptr<ChatBackend> backend_;
    RetryPolicy retry_;
    CacheMode cache_mode_;
    std::unique_ptr<ResponseCache> cache_;
};

/// Extracts a JSON object from raw model text: direct parse first, then the
/// outermost brace-delimited substring (models often wrap JSON in prose or
/// code fences). Returns nullopt if nothing parses.
std::optional<json> extract_json_object(const std::string& text);

}  // namespace arbiter
