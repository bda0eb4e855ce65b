#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "arbiter/gateway.hpp"

using namespace arbiter;
namespace fs = std::filesystem;

namespace {

OutputSchema toy_schema() {
    OutputSchema schema;
    schema.name = "ToyResult";
    schema.fields = {{"reasoning", "why", FieldKind::String, {}},
                     {"selected_text", "which one", FieldKind::StringEnum, {"text_a", "text_b"}}};
    return schema;
}

ChatRequest toy_request(const std::string& user = "pick one") {
    ChatRequest req;
    req.user = user;
    req.schema = toy_schema();
    req.model_tag = "unit-mock";
    return req;
}

struct TempDir {
    fs::path path;
    TempDir() : path(fs::temp_directory_path() /
                     ("gwtest-" + std::to_string(::getpid()) + "-" +
                      std::to_string(reinterpret_cast<std::uintptr_t>(this)))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("json schema rendering matches the flat all-required shape") {
    json schema = toy_schema().to_json_schema();
    CHECK(schema.at("title") == "ToyResult");
    CHECK(schema.at("type") == "object");
    CHECK(schema.at("additionalProperties") == false);
    CHECK(schema.at("required") == json::array({"reasoning", "selected_text"}));
    CHECK(schema.at("properties").at("reasoning").at("type") == "string");
    CHECK(schema.at("properties").at("selected_text").at("enum") ==
          json::array({"text_a", "text_b"}));
}

TEST_CASE("schema validate accepts extras, rejects wrong shapes") {
    OutputSchema schema = toy_schema();
    schema.validate(json{{"reasoning", "ok"}, {"selected_text", "text_a"}, {"extra", 1}});
    CHECK_THROWS_AS(schema.validate(json{{"reasoning", "ok"}}), schema_mismatch_error);
    CHECK_THROWS_AS(schema.validate(json{{"reasoning", "ok"}, {"selected_text", "text_c"}}),
                    schema_mismatch_error);
    CHECK_THROWS_AS(schema.validate(json{{"reasoning", 5}, {"selected_text", "text_a"}}),
                    schema_mismatch_error);
}

TEST_CASE("canonical form is stable and order-sensitive") {
    OutputSchema schema = toy_schema();
    std::string canon = schema.canonical();
    CHECK(canon == toy_schema().canonical());
    OutputSchema reordered = schema;
    std::swap(reordered.fields[0], reordered.fields[1]);
    CHECK(canon != reordered.canonical());
}

TEST_CASE("mock matching: first match wins, consume_once entries retire") {
    auto backend = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{
        {"pick one", json{{"reasoning", "first"}, {"selected_text", "text_a"}}, {}, {}, true},
        {"pick one", json{{"reasoning", "second"}, {"selected_text", "text_b"}}, {}, {}, false},
    });
    BackendSpec spec;
    LlmGateway gateway(backend, spec);

    CHECK(gateway.complete_structured(toy_request()).record.at("reasoning") == "first");
    CHECK(gateway.complete_structured(toy_request()).record.at("reasoning") == "second");
    CHECK(gateway.complete_structured(toy_request()).record.at("reasoning") == "second");
    CHECK(backend->call_count() == 3);
}

TEST_CASE("unmatched prompt is a non-retryable transport error") {
    auto backend = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{});
    LlmGateway gateway(backend, BackendSpec{});
    CHECK_THROWS_AS(gateway.complete_structured(toy_request()), transport_error);
    CHECK(backend->call_count() == 1);  // no retry on script gaps
}

TEST_CASE("text responses are parsed, retried with a corrective suffix, then fail") {
    SUBCASE("fenced json on the first attempt") {
        auto backend = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{
            {"pick one", {},
             "Sure!\n```json\n{\"reasoning\": \"r\", \"selected_text\": \"text_b\"}\n```", {},
             false}});
        LlmGateway gateway(backend, BackendSpec{});
        StructuredResult res = gateway.complete_structured(toy_request());
        CHECK(res.record.at("selected_text") == "text_b");
        CHECK(res.attempts == 1);
    }
    SUBCASE("garbage then valid: corrective retry visible to the script") {
        auto backend = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{
            {"not a valid JSON object", json{{"reasoning", "fixed"}, {"selected_text", "text_a"}},
             {}, {}, false},
            {"pick one", {}, "no json here", {}, false}});
        LlmGateway gateway(backend, BackendSpec{});
        StructuredResult res = gateway.complete_structured(toy_request());
        CHECK(res.attempts == 2);
        CHECK(res.record.at("reasoning") == "fixed");
        CHECK(res.raw_texts.size() == 2);
        CHECK(res.raw_texts[0] == "no json here");
    }
    SUBCASE("persistent garbage exhausts attempts") {
        auto backend = std::make_shared<ScriptedMockBackend>(
            std::vector<MockEntry>{{"", {}, "still no json", {}, false}});
        LlmGateway gateway(backend, BackendSpec{});
        CHECK_THROWS_AS(gateway.complete_structured(toy_request()), malformed_output_error);
        CHECK(backend->call_count() == 3);  // retry.max_attempts
    }
}

TEST_CASE("mock record that violates the schema is flagged as a script bug") {
    auto backend = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{
        {"pick one", json{{"reasoning", "r"}, {"selected_text", "text_c"}}, {}, {}, false}});
    LlmGateway gateway(backend, BackendSpec{});
    CHECK_THROWS_AS(gateway.complete_structured(toy_request()), schema_violation_error);
}

TEST_CASE("token alternatives surface or throw") {
    auto backend = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{
        {"judge", {}, "A", std::vector<TokenLogprob>{{"A", -0.1}, {"B", -2.3}}, false},
        {"mute", {}, "A", {}, false}});
    LlmGateway gateway(backend, BackendSpec{});

    ChatRequest req;
    req.user = "judge";
    req.model_tag = "unit-mock";
    req.want_token_alternatives = true;
    ChatResponse res = gateway.complete_with_token_alternatives(req);
    REQUIRE(res.token_alternatives.has_value());
    REQUIRE(res.token_alternatives->size() == 1);
    CHECK(res.token_alternatives->front().candidates.size() == 2);

    req.user = "mute";
    CHECK_THROWS_AS(gateway.complete_with_token_alternatives(req),
                    backend_lacks_logprobs_error);
}

TEST_CASE("cache keys separate every request dimension") {
    ChatRequest base = toy_request();
    std::string key = LlmGateway::cache_key(base);
    CHECK(key == LlmGateway::cache_key(base));

    ChatRequest other = base;
    other.user = "pick one!";
    CHECK(key != LlmGateway::cache_key(other));
    other = base;
    other.model_tag = "unit-mock-2";
    CHECK(key != LlmGateway::cache_key(other));
    other = base;
    other.temperature = 0.5;
    CHECK(key != LlmGateway::cache_key(other));
    other = base;
    other.seed = 3;
    CHECK(key != LlmGateway::cache_key(other));
    other = base;
    other.schema->fields[1].enum_values.push_back("text_c");
    CHECK(key != LlmGateway::cache_key(other));
    other = base;
    other.want_token_alternatives = true;
    CHECK(key != LlmGateway::cache_key(other));
}

TEST_CASE("read-write cache short-circuits the second identical call") {
    TempDir dir;
    auto backend = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{
        {"pick one", json{{"reasoning", "r"}, {"selected_text", "text_a"}}, {}, {}, false}});
    BackendSpec spec;
    spec.cache_mode = CacheMode::ReadWrite;
    spec.cache_dir = dir.path.string();
    LlmGateway gateway(backend, spec);

    gateway.complete_structured(toy_request());
    CHECK(backend->call_count() == 1);
    gateway.complete_structured(toy_request());
    CHECK(backend->call_count() == 1);

    // a fresh gateway over the same directory also hits the cache
    auto cold_backend = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{});
    LlmGateway warm(cold_backend, spec);
    CHECK(warm.complete_structured(toy_request()).record.at("selected_text") == "text_a");
    CHECK(cold_backend->call_count() == 0);
}

TEST_CASE("corrupt cache entries are treated as misses") {
    TempDir dir;
    auto backend = std::make_shared<ScriptedMockBackend>(std::vector<MockEntry>{
        {"pick one", json{{"reasoning", "r"}, {"selected_text", "text_a"}}, {}, {}, false}});
    BackendSpec spec;
    spec.cache_mode = CacheMode::ReadWrite;
    spec.cache_dir = dir.path.string();

    std::string key = LlmGateway::cache_key(toy_request());
    {
        std::ofstream out(dir.path / (key + ".json"));
        out << "{not json";
    }
    LlmGateway gateway(backend, spec);
    CHECK(gateway.complete_structured(toy_request()).record.at("reasoning") == "r");
    CHECK(backend->call_count() == 1);
}

TEST_CASE("script file loader round trip") {
    TempDir dir;
    fs::path script = dir.path / "script.jsonl";
    {
        std::ofstream out(script);
        out << R"({"matcher": "pick one", "response": {"reasoning": "r", "selected_text": "text_a"}})"
            << "\n";
        out << R"({"matcher": "judge", "response": "A", "token_alternatives": [["A", -0.2], ["B", -1.7]]})"
            << "\n";
    }
    auto backend = ScriptedMockBackend::from_script_file(script);
    LlmGateway gateway(backend, BackendSpec{});
    CHECK(gateway.complete_structured(toy_request()).record.at("reasoning") == "r");

    ChatRequest req;
    req.user = "judge me";
    req.model_tag = "unit-mock";
    req.want_token_alternatives = true;
    ChatResponse res = gateway.complete_with_token_alternatives(req);
    CHECK(res.token_alternatives->front().candidates.front().token == "A");
}

TEST_CASE("extract_json_object digs objects out of prose") {
    CHECK(extract_json_object(R"({"a": 1})")->at("a") == 1);
    CHECK(extract_json_object("prefix {\"a\": {\"b\": 2}} suffix")->at("a").at("b") == 2);
    CHECK(extract_json_object("brace in string: {\"s\": \"}\"} done")->at("s") == "}");
    CHECK(extract_json_object("escaped: {\"s\": \"\\\"}\"}")->at("s") == "\"}");
    CHECK_FALSE(extract_json_object("no braces at all").has_value());
    CHECK_FALSE(extract_json_object("{truncated").has_value());
}
