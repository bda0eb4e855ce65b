#include "arbiter/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include "httplib.h"

#include "arbiter/digest.hpp"
#include "arbiter/net_guard.hpp"

namespace arbiter {

namespace {

std::string snippet(const std::string& text, std::size_t limit = 120) {
    if (text.size() <= limit) return text;
    return text.substr(0, limit) + "...";
}

// "code_useful" -> "Code Useful", matching the pydantic-style schema titles.
std::string title_case(const std::string& field_name) {
    std::string out;
    bool start = true;
    for (char c : field_name) {
        if (c == '_') {
            out += ' ';
            start = true;
        } else {
            out += start ? static_cast<char>(std::toupper(static_cast<unsigned char>(c))) : c;
            start = false;
        }
    }
    return out;
}

Usage rough_usage(const ChatRequest& req, const std::string& text) {
    Usage u;
    std::size_t in = req.user.size() + (req.system ? req.system->size() : 0);
    u.input_tokens = static_cast<std::int64_t>(in / 4 + 1);
    u.output_tokens = static_cast<std::int64_t>(text.size() / 4 + 1);
    return u;
}

}  // namespace

std::string field_kind_to_string(FieldKind kind) {
    switch (kind) {
        case FieldKind::Boolean: return "boolean";
        case FieldKind::Integer: return "integer";
        case FieldKind::String: return "string";
        case FieldKind::StringEnum: return "string-enum";
        case FieldKind::StringList: return "list-of-string";
    }
    throw error("unknown field kind");
}

json OutputSchema::to_json_schema() const {
    json properties = json::object();
    json required = json::array();
    for (const auto& f : fields) {
        json prop;
        prop["title"] = title_case(f.name);
        prop["description"] = f.description;
        switch (f.kind) {
            case FieldKind::Boolean: prop["type"] = "boolean"; break;
            case FieldKind::Integer: prop["type"] = "integer"; break;
            case FieldKind::String: prop["type"] = "string"; break;
            case FieldKind::StringEnum:
                prop["type"] = "string";
                prop["enum"] = f.enum_values;
                break;
            case FieldKind::StringList:
                prop["type"] = "array";
                prop["items"] = json{{"type", "string"}};
                break;
        }
        properties[f.name] = prop;
        required.push_back(f.name);
    }
    json schema;
    schema["title"] = name;
    schema["type"] = "object";
    schema["properties"] = properties;
    schema["required"] = required;
    schema["additionalProperties"] = false;
    return schema;
}

std::string OutputSchema::canonical() const {
    json fields_json = json::array();
    for (const auto& f : fields) {
        json fj;
        fj["name"] = f.name;
        fj["description"] = f.description;
        fj["kind"] = field_kind_to_string(f.kind);
        if (f.kind == FieldKind::StringEnum) fj["enum_values"] = f.enum_values;
        fields_json.push_back(fj);
    }
    // Field order matters, so fields stay a list; dump() sorts object keys.
    return json{{"name", name}, {"fields", fields_json}}.dump();
}

void OutputSchema::validate(const json& record) const {
    if (!record.is_object())
        throw schema_mismatch_error("schema '" + name + "': expected a JSON object, got " +
                                    std::string(record.type_name()));
    for (const auto& f : fields) {
        if (!record.contains(f.name))
            throw schema_mismatch_error("schema '" + name + "': missing field '" + f.name + "'");
        const json& v = record.at(f.name);
        switch (f.kind) {
            case FieldKind::Boolean:
                if (!v.is_boolean())
                    throw schema_mismatch_error("schema '" + name + "': field '" + f.name +
                                                "' must be a boolean");
                break;
            case FieldKind::Integer:
                if (!v.is_number_integer() && !v.is_number_unsigned())
                    throw schema_mismatch_error("schema '" + name + "': field '" + f.name +
                                                "' must be an integer");
                break;
            case FieldKind::String:
                if (!v.is_string())
                    throw schema_mismatch_error("schema '" + name + "': field '" + f.name +
                                                "' must be a string");
                break;
            case FieldKind::StringEnum: {
                if (!v.is_string())
                    throw schema_mismatch_error("schema '" + name + "': field '" + f.name +
                                                "' must be a string");
                const auto& s = v.get_ref<const std::string&>();
                bool found = false;
                for (const auto& allowed : f.enum_values)
                    if (allowed == s) { found = true; break; }
                if (!found)
                    throw schema_mismatch_error("schema '" + name + "': field '" + f.name +
                                                "' has value '" + s + "' outside its enum");
                break;
            }
            case FieldKind::StringList:
                if (!v.is_array())
                    throw schema_mismatch_error("schema '" + name + "': field '" + f.name +
                                                "' must be a list of strings");
                for (const auto& item : v)
                    if (!item.is_string())
                        throw schema_mismatch_error("schema '" + name + "': field '" + f.name +
                                                    "' must contain only strings");
                break;
        }
    }
}

void OutputSchema::check_well_formed() const {
    if (name.empty()) throw error("output schema needs a name");
    if (fields.empty()) throw error("output schema '" + name + "' has no fields");
    std::set<std::string> seen;
    for (const auto& f : fields) {
        if (f.name.empty()) throw error("output schema '" + name + "' has an unnamed field");
        if (!seen.insert(f.name).second)
            throw error("output schema '" + name + "' repeats field '" + f.name + "'");
        if (f.kind == FieldKind::StringEnum && f.enum_values.empty())
            throw error("output schema '" + name + "': enum field '" + f.name + "' has no values");
        if (f.kind != FieldKind::StringEnum && !f.enum_values.empty())
            throw error("output schema '" + name + "': field '" + f.name +
                        "' carries enum values but is not an enum");
    }
}

void ChatRequest::check() const {
    if (temperature < 0.0) throw error("temperature must be >= 0");
    if (schema && want_token_alternatives)
        throw error("structured decoding and token alternatives are mutually exclusive");
    if (schema) schema->check_well_formed();
    if (user.empty()) throw error("chat request needs a user message");
}

void BackendSpec::check() const {
    if (kind == BackendKind::HttpChatApi && !endpoint)
        throw error("http backend needs an endpoint");
    if (kind == BackendKind::ScriptedMock && endpoint)
        throw error("scripted mock takes no endpoint");
    if (retry.max_attempts < 1) throw error("retry.max_attempts must be >= 1");
    if (cache_mode != CacheMode::Off && cache_dir.empty())
        throw error("caching enabled but no cache_dir given");
    if (top_logprobs < 1) throw error("top_logprobs must be >= 1");
}

void to_json(json& j, const ChatResponse& v) {
    j = json::object();
    j["text"] = v.text;
    if (v.parsed) j["parsed"] = *v.parsed;
    if (v.token_alternatives) {
        json positions = json::array();
        for (const auto& ta : *v.token_alternatives) {
            json cands = json::array();
            for (const auto& c : ta.candidates)
                cands.push_back(json{{"token", c.token}, {"logprob", c.logprob}});
            positions.push_back(json{{"position", ta.position}, {"candidates", cands}});
        }
        j["token_alternatives"] = positions;
    }
    j["usage"] = json{{"input_tokens", v.usage.input_tokens},
                      {"output_tokens", v.usage.output_tokens}};
}

void from_json(const json& j, ChatResponse& v) {
    v = ChatResponse{};
    v.text = j.at("text").get<std::string>();
    if (j.contains("parsed")) v.parsed = j.at("parsed");
    if (j.contains("token_alternatives")) {
        std::vector<TokenAlternatives> out;
        for (const auto& pj : j.at("token_alternatives")) {
            TokenAlternatives ta;
            ta.position = pj.at("position").get<int>();
            for (const auto& cj : pj.at("candidates"))
                ta.candidates.push_back(
                    {cj.at("token").get<std::string>(), cj.at("logprob").get<double>()});
            out.push_back(std::move(ta));
        }
        v.token_alternatives = std::move(out);
    }
    if (j.contains("usage")) {
        v.usage.input_tokens = j.at("usage").value("input_tokens", std::int64_t{0});
        v.usage.output_tokens = j.at("usage").value("output_tokens", std::int64_t{0});
    }
}

// ---------------------------------------------------------------------------
// Scripted mock

ScriptedMockBackend::ScriptedMockBackend(std::vector<MockEntry> entries)
    : entries_(std::move(entries)), consumed_(entries_.size(), false) {}

std::shared_ptr<ScriptedMockBackend> ScriptedMockBackend::from_script_file(
    const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw gateway_error("cannot open mock script: " + path.string());
    std::vector<MockEntry> entries;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw gateway_error("mock script " + path.string() + ":" + std::to_string(line_no) +
                                ": " + e.what());
        }
        MockEntry entry;
        try {
            entry.matcher = j.at("matcher").get<std::string>();
            if (j.contains("response")) {
                const json& r = j.at("response");
                if (r.is_string()) {
                    entry.text = r.get<std::string>();
                } else {
                    entry.record = r;
                }
            }
            if (j.contains("token_alternatives")) {
                std::vector<TokenLogprob> alts;
                for (const auto& pair : j.at("token_alternatives"))
                    alts.push_back({pair.at(0).get<std::string>(), pair.at(1).get<double>()});
                entry.token_alternatives = std::move(alts);
            }
            entry.consume_once = j.value("consume_once", false);
        } catch (const json::exception& e) {
            throw gateway_error("mock script " + path.string() + ":" + std::to_string(line_no) +
                                ": " + e.what());
        }
        if (!entry.record && !entry.text && !entry.token_alternatives)
            throw gateway_error("mock script " + path.string() + ":" + std::to_string(line_no) +
                                ": entry has neither response nor token_alternatives");
        entries.push_back(std::move(entry));
    }
    return std::make_shared<ScriptedMockBackend>(std::move(entries));
}

ChatResponse ScriptedMockBackend::chat(const ChatRequest& req) {
    std::lock_guard<std::mutex> lock(mutex_);
    ++calls_;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i].consume_once && consumed_[i]) continue;
        if (req.user.find(entries_[i].matcher) == std::string::npos) continue;
        consumed_[i] = true;
        const MockEntry& entry = entries_[i];
        ChatResponse res;
        if (entry.record) {
            res.parsed = *entry.record;
            res.text = entry.record->dump();
        } else if (entry.text) {
            res.text = *entry.text;
        }
        if (entry.token_alternatives && !entry.token_alternatives->empty()) {
            res.token_alternatives =
                std::vector<TokenAlternatives>{{0, *entry.token_alternatives}};
        }
        res.usage = rough_usage(req, res.text);
        return res;
    }
    throw transport_error(
        "mock script has no entry matching prompt: \"" + snippet(req.user, 80) + "\"",
        /*retryable=*/false);
}

// ---------------------------------------------------------------------------
// HTTP chat-completions backend

HttpChatBackend::HttpChatBackend(BackendSpec spec) : spec_(std::move(spec)) {
    spec_.check();
    if (spec_.kind != BackendKind::HttpChatApi)
        throw error("HttpChatBackend requires an HttpChatApi spec");
}

namespace {

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;
};

SplitUrl split_url(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw error("endpoint must include a scheme: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

ChatResponse HttpChatBackend::chat(const ChatRequest& req) {
    calls_.fetch_add(1);
    net_guard::record_network_attempt();

    json messages = json::array();
    std::string user_content = req.user;
    if (req.schema && spec_.schema_transport == SchemaTransport::PromptInjected) {
        user_content += "\n\nRespond with a single JSON object conforming to this JSON schema, "
                        "with no surrounding prose or code fences:\n" +
                        req.schema->to_json_schema().dump();
    }
    if (req.system) messages.push_back(json{{"role", "system"}, {"content", *req.system}});
    messages.push_back(json{{"role", "user"}, {"content", user_content}});

    json body;
    body["model"] = req.model_tag;
    body["messages"] = messages;
    body["temperature"] = req.temperature;
    if (req.seed) body["seed"] = *req.seed;
    if (req.want_token_alternatives) {
        body["logprobs"] = true;
        body["top_logprobs"] = spec_.top_logprobs;
    }
    if (req.schema && spec_.schema_transport == SchemaTransport::Native) {
        body["response_format"] =
            json{{"type", "json_schema"},
                 {"json_schema",
                  json{{"name", req.schema->name}, {"schema", req.schema->to_json_schema()},
                       {"strict", true}}}};
    }

    httplib::Headers headers;
    if (spec_.auth_env) {
        const char* key = std::getenv(spec_.auth_env->c_str());
        if (!key || !*key)
            throw transport_error("auth environment variable " + *spec_.auth_env + " is not set",
                                  /*retryable=*/false);
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    SplitUrl url = split_url(*spec_.endpoint);
    httplib::Client client(url.base);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);

    auto result = client.Post(url.path, headers, body.dump(), "application/json");
    if (!result)
        throw transport_error("no response from " + url.base + ": " + to_string(result.error()),
                              /*retryable=*/true);
    if (result->status == 429 || result->status >= 500)
        throw transport_error("backend returned status " + std::to_string(result->status) + ": " +
                                  snippet(result->body),
                              /*retryable=*/true);
    if (result->status != 200)
        throw transport_error("backend returned status " + std::to_string(result->status) + ": " +
                                  snippet(result->body),
                              /*retryable=*/false);

    json payload;
    try {
        payload = json::parse(result->body);
    } catch (const json::parse_error& e) {
        throw transport_error(std::string("unparseable backend response: ") + e.what(),
                              /*retryable=*/true);
    }

    ChatResponse res;
    try {
        const json& choice = payload.at("choices").at(0);
        const json& message = choice.at("message");
        if (message.contains("content") && message.at("content").is_string())
            res.text = message.at("content").get<std::string>();
        if (req.want_token_alternatives && choice.contains("logprobs") &&
            choice.at("logprobs").is_object()) {
            const json& content = choice.at("logprobs").value("content", json::array());
            std::vector<TokenAlternatives> positions;
            int pos = 0;
            for (const auto& tok : content) {
                TokenAlternatives ta;
                ta.position = pos++;
                for (const auto& alt : tok.value("top_logprobs", json::array()))
                    ta.candidates.push_back({alt.at("token").get<std::string>(),
                                             alt.at("logprob").get<double>()});
                positions.push_back(std::move(ta));
            }
            if (!positions.empty()) res.token_alternatives = std::move(positions);
        }
        if (payload.contains("usage")) {
            res.usage.input_tokens = payload.at("usage").value("prompt_tokens", std::int64_t{0});
            res.usage.output_tokens =
                payload.at("usage").value("completion_tokens", std::int64_t{0});
        }
    } catch (const json::exception& e) {
        throw transport_error(std::string("unexpected backend response shape: ") + e.what(),
                              /*retryable=*/false);
    }
    return res;
}

// ---------------------------------------------------------------------------
// Response cache

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::optional<ChatResponse> ResponseCache::get(const std::string& key) const {
    std::lock_guard<std::mutex> lock(mutex_);
    auto path = dir_ / (key + ".json");
    std::ifstream in(path);
    if (!in) return std::nullopt;
    try {
        json j = json::parse(in);
        return j.get<ChatResponse>();
    } catch (const json::exception&) {
        return std::nullopt;  // unreadable entry counts as a miss
    }
}

void ResponseCache::put(const std::string& key, const ChatResponse& response) {
    std::lock_guard<std::mutex> lock(mutex_);
    auto final_path = dir_ / (key + ".json");
    auto tmp_path = dir_ / (key + ".tmp");
    {
        std::ofstream out(tmp_path);
        if (!out) throw error("cannot write cache entry: " + tmp_path.string());
        out << json(response).dump(2) << '\n';
    }
    std::filesystem::rename(tmp_path, final_path);
}

// ---------------------------------------------------------------------------
// Gateway

LlmGateway::LlmGateway(std::shared_ptr<ChatBackend> backend, const BackendSpec& spec)
    : backend_(std::move(backend)), retry_(spec.retry), cache_mode_(spec.cache_mode) {
    spec.check();
    if (!backend_) throw error("gateway needs a backend");
    if (cache_mode_ != CacheMode::Off) cache_ = std::make_unique<ResponseCache>(spec.cache_dir);
}

std::string LlmGateway::cache_key(const ChatRequest& req) {
    json j;
    j["model_tag"] = req.model_tag;
    j["system"] = req.system ? json(*req.system) : json(nullptr);
    j["user"] = req.user;
    j["schema"] = req.schema ? json(req.schema->canonical()) : json(nullptr);
    j["temperature"] = req.temperature;
    j["want_token_alternatives"] = req.want_token_alternatives;
    j["seed"] = req.seed ? json(*req.seed) : json(nullptr);
    return sha256_hex(j.dump());
}

ChatResponse LlmGateway::call_with_transport_retry(const ChatRequest& req) {
    int delay_ms = retry_.backoff_initial_ms;
    for (int attempt = 1;; ++attempt) {
        try {
            return backend_->chat(req);
        } catch (const transport_error& e) {
            if (!e.retryable || attempt >= retry_.max_attempts) throw;
            std::this_thread::sleep_for(std::chrono::milliseconds(delay_ms));
            delay_ms = static_cast<int>(delay_ms * retry_.backoff_factor);
        }
    }
}

ChatResponse LlmGateway::raw_call(const ChatRequest& req) {
    req.check();
    std::string key;
    if (cache_mode_ != CacheMode::Off) {
        key = cache_key(req);
        if (auto hit = cache_->get(key)) return *hit;
    }
    ChatResponse res = call_with_transport_retry(req);
    if (cache_mode_ == CacheMode::ReadWrite) cache_->put(key, res);
    return res;
}

StructuredResult LlmGateway::complete_structured(const ChatRequest& req) {
    if (!req.schema) throw error("complete_structured needs a schema");
    req.check();

    StructuredResult result;
    ChatRequest attempt_req = req;
    for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
        ChatResponse res = raw_call(attempt_req);
        result.attempts = attempt;
        result.raw_texts.push_back(res.text);

        if (res.parsed) {
            // The backend itself produced a record (scripted mock). A
            // nonconforming record here is a bug in the script, not model
            // noise, so it fails loudly instead of retrying.
            try {
                req.schema->validate(*res.parsed);
            } catch (const schema_mismatch_error& e) {
                throw schema_violation_error(std::string("scripted record rejected: ") + e.what());
            }
            result.record = *res.parsed;
            return result;
        }

        if (auto obj = extract_json_object(res.text)) {
            try {
                req.schema->validate(*obj);
                result.record = *obj;
                return result;
            } catch (const schema_mismatch_error&) {
                // fall through to retry
            }
        }

        if (attempt < retry_.max_attempts) {
            attempt_req.user = req.user +
                               "\n\nYour previous reply (attempt " + std::to_string(attempt) +
                               ") was not a valid JSON object for the required schema. Respond "
                               "with exactly one JSON object containing the required fields and "
                               "nothing else.";
        }
    }
    throw malformed_output_error("no valid structured output after " +
                                 std::to_string(result.attempts) + " attempts; last reply: \"" +
                                 snippet(result.raw_texts.back(), 160) + "\"");
}

ChatResponse LlmGateway::complete_with_token_alternatives(const ChatRequest& req) {
    if (!req.want_token_alternatives)
        throw error("complete_with_token_alternatives needs want_token_alternatives");
    req.check();
    ChatResponse res = raw_call(req);
    bool usable = res.token_alternatives && !res.token_alternatives->empty() &&
                  !res.token_alternatives->front().candidates.empty();
    if (!usable)
        throw backend_lacks_logprobs_error("backend returned no token alternatives");
    return res;
}

ChatResponse LlmGateway::complete_text(const ChatRequest& req) {
    if (req.schema) throw error("complete_text takes no schema");
    if (req.want_token_alternatives)
        throw error("complete_text does not fetch token alternatives");
    req.check();
    return raw_call(req);
}

// ---------------------------------------------------------------------------

std::optional<json> extract_json_object(const std::string& text) {
    {
        json direct = json::parse(text, nullptr, /*allow_exceptions=*/false);
        if (direct.is_object()) return direct;
    }
    // Scan balanced top-level {...} spans, tolerating prose and code fences
    // around them. Strings and escapes are respected so embedded braces do
    // not end a span early.
    std::size_t start = text.find('{');
    while (start != std::string::npos) {
        int depth = 0;
        bool in_string = false;
        bool escaped = false;
        for (std::size_t i = start; i < text.size(); ++i) {
            char c = text[i];
            if (in_string) {
                if (escaped) {
                    escaped = false;
                } else if (c == '\\') {
                    escaped = true;
                } else if (c == '"') {
                    in_string = false;
                }
                continue;
            }
            if (c == '"') {
                in_string = true;
            } else if (c == '{') {
                ++depth;
            } else if (c == '}') {
                if (--depth == 0) {
                    json candidate = json::parse(text.substr(start, i - start + 1), nullptr,
                                                 /*allow_exceptions=*/false);
                    if (candidate.is_object()) return candidate;
                    break;
                }
            }
        }
        start = text.find('{', start + 1);
    }
    return std::nullopt;
}

}  // namespace arbiter
