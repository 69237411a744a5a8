#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "rvcheck/errors.hpp"
#include "rvcheck/provider.hpp"

using namespace rvcheck;
using nlohmann::json;

namespace {

std::filesystem::path write_temp(const std::string& name, const std::string& content) {
    auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path;
}

CompletionRequest basic_request(std::string prompt = "hello there") {
    CompletionRequest request;
    request.user_prompt = std::move(prompt);
    request.model_id = "test-model";
    return request;
}

// In-process HTTP endpoint for driving HttpProvider.
struct TestServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    explicit TestServer(httplib::Server::Handler handler) {
        server.Post("/v1/chat/completions", std::move(handler));
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }

    ~TestServer() {
        server.stop();
        thread.join();
    }

    HttpProviderConfig config() const {
        HttpProviderConfig cfg;
        cfg.base_url = "http://127.0.0.1:" + std::to_string(port) + "/v1";
        cfg.api_key = "test-key";
        cfg.retry = RetryPolicy{2, 1, 2.0};
        cfg.timeout_seconds = 5;
        return cfg;
    }
};

std::string chat_body(const std::string& content, bool with_usage,
                      const std::string& finish = "stop") {
    json body;
    body["choices"] = json::array({{{"message", {{"role", "assistant"}, {"content", content}}},
                                    {"finish_reason", finish}}});
    if (with_usage)
        body["usage"] = {{"prompt_tokens", 7}, {"completion_tokens", 3}, {"total_tokens", 10}};
    return body.dump();
}

}  // namespace

TEST_CASE("estimate_tokens approximates 4/3 of word count, rounded up") {
    CHECK(estimate_tokens("") == 0);
    CHECK(estimate_tokens("   \t\n") == 0);
    CHECK(estimate_tokens("one") == 2);
    CHECK(estimate_tokens("hello world") == 3);
    CHECK(estimate_tokens("a b c") == 4);
    CHECK(estimate_tokens("a b c d e f") == 8);
    CHECK(estimate_tokens("  padded   words here  ") == 4);
}

TEST_CASE("make_request carries pipeline defaults") {
    CompletionDefaults defaults;
    defaults.model_id = "m1";
    defaults.temperature = 0.4;
    defaults.top_p = 0.9;
    defaults.max_tokens = 256;
    defaults.top_k = 5;
    CompletionRequest request = make_request(defaults, "ask me");
    CHECK(request.user_prompt == "ask me");
    CHECK(request.model_id == "m1");
    CHECK(request.temperature == doctest::Approx(0.4));
    CHECK(request.top_p == doctest::Approx(0.9));
    CHECK(request.max_tokens == 256);
    CHECK(request.top_k == 5);
    CHECK(!request.system_prompt.has_value());
}

TEST_CASE("mock provider picks the first matching rule") {
    MockScript script;
    script.rules.push_back({"alpha", std::nullopt, "first", std::nullopt});
    script.rules.push_back({"alpha beta", std::nullopt, "second", std::nullopt});
    script.rules.push_back({"", "bet+a$", "regex hit", std::nullopt});
    script.default_response = "fallback";
    MockProvider provider(script);

    CHECK(provider.complete(basic_request("say alpha beta")).text == "first");
    CHECK(provider.complete(basic_request("say betttta")).text == "regex hit");
    CHECK(provider.complete(basic_request("nothing matches")).text == "fallback");

    auto calls = provider.calls();
    REQUIRE(calls.size() == 3);
    CHECK(calls[0] == "say alpha beta");
    CHECK(calls[1] == "say betttta");
    CHECK(calls[2] == "nothing matches");
}

TEST_CASE("mock provider usage accounting") {
    MockScript script;
    UsageStats scripted;
    scripted.prompt_tokens = 11;
    scripted.completion_tokens = 4;
    scripted.total_tokens = 999;  // recomputed on replay
    scripted.wall_time = 0.5;
    scripted.call_count = 7;  // forced back to 1
    script.rules.push_back({"scripted", std::nullopt, "yes", scripted});
    script.rules.push_back({"plain", std::nullopt, "two words", std::nullopt});
    MockProvider provider(script);

    SUBCASE("scripted usage is exact") {
        CompletionResult result = provider.complete(basic_request("scripted call"));
        CHECK(!result.usage_estimated);
        CHECK(result.usage.prompt_tokens == 11);
        CHECK(result.usage.completion_tokens == 4);
        CHECK(result.usage.total_tokens == 15);
        CHECK(result.usage.wall_time == doctest::Approx(0.5));
        CHECK(result.usage.call_count == 1);
    }
    SUBCASE("missing usage falls back to the token estimate") {
        CompletionResult result = provider.complete(basic_request("plain call"));
        CHECK(result.usage_estimated);
        CHECK(result.usage.prompt_tokens == estimate_tokens("plain call"));
        CHECK(result.usage.completion_tokens == estimate_tokens("two words"));
        CHECK(result.usage.call_count == 1);
    }
}

TEST_CASE("mock provider reports refusals as empty text with an error finish") {
    MockScript script;
    script.rules.push_back({"refuse", std::nullopt, "", std::nullopt});
    script.default_response = "ok";
    MockProvider provider(script);
    CompletionResult result = provider.complete(basic_request("please refuse this"));
    CHECK(result.text.empty());
    CHECK(result.finish_reason == FinishReason::Error);
    CHECK(provider.complete(basic_request("fine")).finish_reason == FinishReason::Stop);
}

TEST_CASE("mock provider validates the request") {
    MockProvider provider(MockScript{});
    CHECK_THROWS_AS(provider.complete(basic_request("")), SchemaViolation);
    CompletionRequest no_model = basic_request();
    no_model.model_id.clear();
    CHECK_THROWS_AS(provider.complete(no_model), SchemaViolation);
    CompletionRequest bad_temp = basic_request();
    bad_temp.temperature = -0.1;
    CHECK_THROWS_AS(provider.complete(bad_temp), SchemaViolation);
    CompletionRequest bad_top_p = basic_request();
    bad_top_p.top_p = 0.0;
    CHECK_THROWS_AS(provider.complete(bad_top_p), SchemaViolation);
    bad_top_p.top_p = 1.5;
    CHECK_THROWS_AS(provider.complete(bad_top_p), SchemaViolation);
}

TEST_CASE("mock script files parse rules, usage, and defaults") {
    auto path = write_temp("rv_mock_ok.jsonl", R"({"match": "ping", "response": "pong", "usage": {"prompt_tokens": 2, "completion_tokens": 1, "wall_time": 0.25}}
{"match_regex": "^exact$", "response": "regex"}

{"default_response": "dunno"}
)");
    MockScript script = MockScript::from_file(path);
    REQUIRE(script.rules.size() == 2);
    CHECK(script.rules[0].match == "ping");
    CHECK(script.rules[0].response == "pong");
    REQUIRE(script.rules[0].usage.has_value());
    CHECK(script.rules[0].usage->prompt_tokens == 2);
    CHECK(script.rules[0].usage->completion_tokens == 1);
    CHECK(script.rules[0].usage->total_tokens == 3);
    CHECK(script.rules[0].usage->wall_time == doctest::Approx(0.25));
    CHECK(script.rules[1].match_regex == "^exact$");
    CHECK(script.default_response == "dunno");
}

TEST_CASE("mock script loader rejects malformed input with line numbers") {
    SUBCASE("bad json") {
        auto path = write_temp("rv_mock_bad_json.jsonl", "{\"match\": \"a\", \"response\": \"b\"}\n{oops\n");
        CHECK_THROWS_WITH_AS(MockScript::from_file(path),
                             doctest::Contains("mock script line 2"), SchemaViolation);
    }
    SUBCASE("bad regex") {
        auto path = write_temp("rv_mock_bad_regex.jsonl", R"({"match_regex": "([", "response": "x"})");
        CHECK_THROWS_WITH_AS(MockScript::from_file(path), doctest::Contains("bad regex"),
                             SchemaViolation);
    }
    SUBCASE("rule without matcher") {
        auto path = write_temp("rv_mock_no_matcher.jsonl", R"({"response": "x"})");
        CHECK_THROWS_AS(MockScript::from_file(path), SchemaViolation);
    }
    SUBCASE("missing file") {
        CHECK_THROWS_AS(MockScript::from_file("/nonexistent/mock.jsonl"), SchemaViolation);
    }
}

TEST_CASE("http provider round trip against a local endpoint") {
    std::string seen_body;
    std::string seen_auth;
    TestServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        seen_auth = req.get_header_value("Authorization");
        res.set_content(chat_body("All good.", true), "application/json");
    });
    HttpProvider provider(server.config());

    CompletionRequest request = basic_request("check this passage");
    request.system_prompt = "be terse";
    request.max_tokens = 64;
    request.top_k = 1;
    request.temperature = 0.1;
    request.top_p = 0.05;
    CompletionResult result = provider.complete(request);

    CHECK(result.text == "All good.");
    CHECK(result.finish_reason == FinishReason::Stop);
    CHECK(!result.usage_estimated);
    CHECK(result.usage.prompt_tokens == 7);
    CHECK(result.usage.completion_tokens == 3);
    CHECK(result.usage.total_tokens == 10);
    CHECK(result.usage.call_count == 1);
    CHECK(result.usage.wall_time > 0.0);

    CHECK(seen_auth == "Bearer test-key");
    json body = json::parse(seen_body);
    CHECK(body.at("model") == "test-model");
    REQUIRE(body.at("messages").size() == 2);
    CHECK(body.at("messages")[0].at("role") == "system");
    CHECK(body.at("messages")[0].at("content") == "be terse");
    CHECK(body.at("messages")[1].at("role") == "user");
    CHECK(body.at("messages")[1].at("content") == "check this passage");
    CHECK(body.at("temperature").get<double>() == doctest::Approx(0.1));
    CHECK(body.at("top_p").get<double>() == doctest::Approx(0.05));
    CHECK(body.at("max_tokens") == 64);
    CHECK(body.at("top_k") == 1);
}

TEST_CASE("http provider estimates usage when the endpoint omits it") {
    TestServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content(chat_body("three word reply", false), "application/json");
    });
    HttpProvider provider(server.config());
    CompletionResult result = provider.complete(basic_request("two words"));
    CHECK(result.usage_estimated);
    CHECK(result.usage.prompt_tokens == estimate_tokens("two words"));
    CHECK(result.usage.completion_tokens == estimate_tokens("three word reply"));
    CHECK(result.usage.call_count == 1);
}

TEST_CASE("http provider maps finish reasons") {
    std::string finish = "length";
    TestServer server([&](const httplib::Request&, httplib::Response& res) {
        res.set_content(chat_body("cut off", true, finish), "application/json");
    });
    HttpProvider provider(server.config());
    CHECK(provider.complete(basic_request()).finish_reason == FinishReason::Length);
    finish = "content_filter";
    CHECK(provider.complete(basic_request()).finish_reason == FinishReason::Error);
}

TEST_CASE("http provider treats null content as a refusal, not an exception") {
    TestServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices": [{"message": {"role": "assistant", "content": null},
                            "finish_reason": "content_filter"}]})",
                        "application/json");
    });
    HttpProvider provider(server.config());
    CompletionResult result = provider.complete(basic_request());
    CHECK(result.text.empty());
    CHECK(result.finish_reason == FinishReason::Error);
}

TEST_CASE("http provider fails fast on auth errors") {
    std::atomic<int> hits{0};
    TestServer server([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 401;
    });
    HttpProvider provider(server.config());
    CHECK_THROWS_AS(provider.complete(basic_request()), AuthError);
    CHECK(hits.load() == 1);
}

TEST_CASE("http provider retries server errors and recovers") {
    std::atomic<int> hits{0};
    TestServer server([&](const httplib::Request&, httplib::Response& res) {
        if (++hits < 3) {
            res.status = 500;
            return;
        }
        res.set_content(chat_body("recovered", true), "application/json");
    });
    HttpProvider provider(server.config());
    CompletionResult result = provider.complete(basic_request());
    CHECK(result.text == "recovered");
    CHECK(hits.load() == 3);
}

TEST_CASE("http provider raises RateLimited after exhausting retries on 429") {
    std::atomic<int> hits{0};
    TestServer server([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 429;
    });
    HttpProvider provider(server.config());
    CHECK_THROWS_AS(provider.complete(basic_request()), RateLimited);
    CHECK(hits.load() == 3);  // max_retries 2 -> 3 attempts
}

TEST_CASE("http provider raises TransportError for unexpected statuses without retrying") {
    std::atomic<int> hits{0};
    TestServer server([&](const httplib::Request&, httplib::Response& res) {
        ++hits;
        res.status = 404;
        res.set_content("not here", "text/plain");
    });
    HttpProvider provider(server.config());
    CHECK_THROWS_AS(provider.complete(basic_request()), TransportError);
    CHECK(hits.load() == 1);
}

TEST_CASE("http provider raises TransportError on malformed payloads") {
    TestServer server([](const httplib::Request&, httplib::Response& res) {
        res.set_content("not json at all", "application/json");
    });
    HttpProvider provider(server.config());
    CHECK_THROWS_AS(provider.complete(basic_request()), TransportError);
}

TEST_CASE("http provider raises TransportError when the endpoint is unreachable") {
    HttpProviderConfig config;
    config.base_url = "http://127.0.0.1:1/v1";
    config.api_key = "k";
    config.retry = RetryPolicy{0, 1, 2.0};
    config.timeout_seconds = 1;
    HttpProvider provider(config);
    CHECK_THROWS_AS(provider.complete(basic_request()), TransportError);
}

TEST_CASE("provider config reads endpoint and retry settings from the environment") {
    setenv("RV_API_BASE", "http://example.test/v1", 1);
    setenv("RV_API_KEY", "secret", 1);
    setenv("RV_RETRY_MAX", "0", 1);
    setenv("RV_RETRY_BASE_MS", "5", 1);
    setenv("RV_TIMEOUT_S", "9", 1);
    HttpProviderConfig config = HttpProviderConfig::from_env();
    CHECK(config.base_url == "http://example.test/v1");
    CHECK(config.api_key == "secret");
    CHECK(config.retry.max_retries == 0);
    CHECK(config.retry.base_delay_ms == 5);
    CHECK(config.timeout_seconds == 9);

    setenv("RV_RETRY_MAX", "nope", 1);
    CHECK_THROWS_AS(HttpProviderConfig::from_env(), SchemaViolation);

    unsetenv("RV_API_BASE");
    unsetenv("RV_API_KEY");
    unsetenv("RV_RETRY_MAX");
    unsetenv("RV_RETRY_BASE_MS");
    unsetenv("RV_TIMEOUT_S");
    HttpProviderConfig defaults = HttpProviderConfig::from_env();
    CHECK(defaults.retry.max_retries == 3);
    CHECK(defaults.retry.base_delay_ms == 1000);
    CHECK(defaults.timeout_seconds == 120);
}
