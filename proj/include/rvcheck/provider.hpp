#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rvcheck/core.hpp"

namespace rvcheck {

enum class FinishReason { Stop, Length, Error };

struct CompletionRequest {
    std::optional<std::string> system_prompt;
    std::string user_prompt;
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<long long> max_tokens;
    std::string model_id;
    std::optional<int> top_k;  // provider extension, only sent when set
};

struct CompletionResult {
    std::string text;
    UsageStats usage;  // call_count == 1 for a single exchange
    FinishReason finish_reason = FinishReason::Stop;
    bool usage_estimated = false;  // true when the provider reported no usage
};

// Per-pipeline request settings; stage code fills in the user prompt.
struct CompletionDefaults {
    std::string model_id = "mock";
    double temperature = 0.0;
    double top_p = 1.0;
    std::optional<long long> max_tokens;
    std::optional<int> top_k;
};

CompletionRequest make_request(const CompletionDefaults& defaults, std::string user_prompt);

// Deterministic approximation: ceil(whitespace-delimited word count * 4/3).
// Used only when a provider returns no usage; results carry an estimated flag.
long long estimate_tokens(std::string_view text);

class Provider {
  public:
    virtual ~Provider() = default;
    // Thread safe; throws TransportError / AuthError / RateLimited on aborts.
    // Refusals surface as empty text with FinishReason::Error, not exceptions.
    virtual CompletionResult complete(const CompletionRequest& request) = 0;
};

// ---- scripted mock ----

struct MockRule {
    std::string match;                       // substring over the user prompt
    std::optional<std::string> match_regex;  // alternative: ECMAScript regex search
    std::string response;
    std::optional<UsageStats> usage;  // simulated usage; estimated when absent
};

struct MockScript {
    std::vector<MockRule> rules;  // first matching rule wins
    std::string default_response;

    static MockScript from_file(const std::filesystem::path& path);
};

class MockProvider : public Provider {
  public:
    explicit MockProvider(MockScript script) : script_(std::move(script)) {}

    CompletionResult complete(const CompletionRequest& request) override;

    // Prompts seen so far, in call order. Test hook.
    std::vector<std::string> calls() const;

  private:
    MockScript script_;
    mutable std::mutex mutex_;
    std::vector<std::string> calls_;
};

// ---- live OpenAI-compatible endpoint ----

struct RetryPolicy {
    int max_retries = 3;          // attempts = max_retries + 1
    int base_delay_ms = 1000;     // 1s/2s/4s by default
    double backoff_factor = 2.0;
};

struct HttpProviderConfig {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string api_key;
    RetryPolicy retry;
    int timeout_seconds = 120;
    int max_in_flight = 8;  // concurrent request throttle

    // Reads RV_API_BASE / RV_API_KEY.
    static HttpProviderConfig from_env();
};

class HttpProvider : public Provider {
  public:
    explicit HttpProvider(HttpProviderConfig config);
    ~HttpProvider() override;

    CompletionResult complete(const CompletionRequest& request) override;

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace rvcheck
