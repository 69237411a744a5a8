#include "rvcheck/provider.hpp"

#include <atomic>
#include <cctype>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include <httplib.h>

#include "rvcheck/errors.hpp"

namespace rvcheck {

namespace {

using nlohmann::json;

void validate_request(const CompletionRequest& request) {
    if (request.user_prompt.empty()) throw SchemaViolation("completion request has empty user prompt");
    if (request.temperature < 0.0) throw SchemaViolation("temperature must be >= 0");
    if (request.top_p <= 0.0 || request.top_p > 1.0) throw SchemaViolation("top_p must be in (0, 1]");
    if (request.model_id.empty()) throw SchemaViolation("completion request has empty model id");
}

UsageStats estimated_usage(const CompletionRequest& request, const std::string& response) {
    long long prompt = estimate_tokens(request.user_prompt);
    if (request.system_prompt) prompt += estimate_tokens(*request.system_prompt);
    return UsageStats::single(prompt, estimate_tokens(response), 0.0);
}

UsageStats usage_from_json(const json& rule) {
    UsageStats usage;
    const json& u = rule.at("usage");
    usage.prompt_tokens = u.value("prompt_tokens", 0LL);
    usage.completion_tokens = u.value("completion_tokens", 0LL);
    usage.total_tokens = usage.prompt_tokens + usage.completion_tokens;
    usage.wall_time = u.value("wall_time", 0.0);
    usage.call_count = 1;
    return usage;
}

}  // namespace

CompletionRequest make_request(const CompletionDefaults& defaults, std::string user_prompt) {
    CompletionRequest request;
    request.user_prompt = std::move(user_prompt);
    request.temperature = defaults.temperature;
    request.top_p = defaults.top_p;
    request.max_tokens = defaults.max_tokens;
    request.model_id = defaults.model_id;
    request.top_k = defaults.top_k;
    return request;
}

long long estimate_tokens(std::string_view text) {
    long long words = 0;
    bool in_word = false;
    for (char c : text) {
        bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    if (words == 0) return 0;
    return (words * 4 + 2) / 3;
}

// ---- scripted mock ----

MockScript MockScript::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SchemaViolation("cannot open mock script: " + path.string());
    MockScript script;
    std::string line;
    long long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json entry;
        try {
            entry = json::parse(line);
        } catch (const json::exception& e) {
            throw SchemaViolation("mock script line " + std::to_string(line_no) + ": " + e.what());
        }
        if (entry.contains("default_response")) {
            script.default_response = entry.at("default_response").get<std::string>();
            continue;
        }
        MockRule rule;
        if (entry.contains("match_regex")) {
            rule.match_regex = entry.at("match_regex").get<std::string>();
            try {
                std::regex probe(*rule.match_regex, std::regex::ECMAScript);
            } catch (const std::regex_error& e) {
                throw SchemaViolation("mock script line " + std::to_string(line_no) +
                                      ": bad regex: " + e.what());
            }
        } else if (entry.contains("match")) {
            rule.match = entry.at("match").get<std::string>();
        } else {
            throw SchemaViolation("mock script line " + std::to_string(line_no) +
                                  ": rule needs match or match_regex");
        }
        rule.response = entry.value("response", std::string{});
        if (entry.contains("usage")) rule.usage = usage_from_json(entry);
        script.rules.push_back(std::move(rule));
    }
    return script;
}

CompletionResult MockProvider::complete(const CompletionRequest& request) {
    validate_request(request);
    {
        std::lock_guard<std::mutex> lock(mutex_);
        calls_.push_back(request.user_prompt);
    }
    const MockRule* hit = nullptr;
    for (const MockRule& rule : script_.rules) {
        if (rule.match_regex) {
            std::regex pattern(*rule.match_regex, std::regex::ECMAScript);
            if (std::regex_search(request.user_prompt, pattern)) {
                hit = &rule;
                break;
            }
        } else if (request.user_prompt.find(rule.match) != std::string::npos) {
            hit = &rule;
            break;
        }
    }
    CompletionResult result;
    if (hit) {
        result.text = hit->response;
        if (hit->usage) {
            result.usage = *hit->usage;
            result.usage.call_count = 1;
            result.usage.total_tokens = result.usage.prompt_tokens + result.usage.completion_tokens;
            result.usage_estimated = false;
        } else {
            result.usage = estimated_usage(request, result.text);
            result.usage_estimated = true;
        }
    } else {
        result.text = script_.default_response;
        result.usage = estimated_usage(request, result.text);
        result.usage_estimated = true;
    }
    result.finish_reason = result.text.empty() ? FinishReason::Error : FinishReason::Stop;
    return result;
}

std::vector<std::string> MockProvider::calls() const {
    std::lock_guard<std::mutex> lock(mutex_);
    return calls_;
}

// ---- live OpenAI-compatible endpoint ----

HttpProviderConfig HttpProviderConfig::from_env() {
    HttpProviderConfig config;
    if (const char* base = std::getenv("RV_API_BASE")) config.base_url = base;
    if (const char* key = std::getenv("RV_API_KEY")) config.api_key = key;
    auto int_env = [](const char* name, int fallback) {
        const char* raw = std::getenv(name);
        if (raw == nullptr || *raw == '\0') return fallback;
        try {
            size_t used = 0;
            int value = std::stoi(raw, &used);
            if (used != std::string(raw).size() || value < 0)
                throw SchemaViolation(std::string(name) + " must be a non-negative integer");
            return value;
        } catch (const SchemaViolation&) {
            throw;
        } catch (const std::exception&) {
            throw SchemaViolation(std::string(name) + " must be a non-negative integer");
        }
    };
    config.retry.max_retries = int_env("RV_RETRY_MAX", config.retry.max_retries);
    config.retry.base_delay_ms = int_env("RV_RETRY_BASE_MS", config.retry.base_delay_ms);
    config.timeout_seconds = int_env("RV_TIMEOUT_S", config.timeout_seconds);
    return config;
}

namespace {

// Splits "https://host:port/v1" into origin + path prefix.
struct ParsedBase {
    std::string origin;
    std::string prefix;
};

ParsedBase parse_base_url(const std::string& base_url) {
    if (base_url.empty()) throw SchemaViolation("provider base url is empty (set RV_API_BASE)");
    std::string::size_type scheme_end = base_url.find("://");
    std::string::size_type path_start =
        base_url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    ParsedBase parsed;
    if (path_start == std::string::npos) {
        parsed.origin = base_url;
    } else {
        parsed.origin = base_url.substr(0, path_start);
        parsed.prefix = base_url.substr(path_start);
    }
    while (!parsed.prefix.empty() && parsed.prefix.back() == '/') parsed.prefix.pop_back();
    return parsed;
}

class Throttle {
  public:
    explicit Throttle(int limit) : limit_(limit > 0 ? limit : 1) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mutex_);
        cv_.wait(lock, [this] { return in_flight_ < limit_; });
        ++in_flight_;
    }

    void release() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            --in_flight_;
        }
        cv_.notify_one();
    }

  private:
    int limit_;
    int in_flight_ = 0;
    std::mutex mutex_;
    std::condition_variable cv_;
};

}  // namespace

struct HttpProvider::Impl {
    HttpProviderConfig config;
    ParsedBase base;
    Throttle throttle;

    explicit Impl(HttpProviderConfig cfg)
        : config(std::move(cfg)), base(parse_base_url(config.base_url)), throttle(config.max_in_flight) {}

    std::unique_ptr<httplib::Client> make_client() const {
        auto client = std::make_unique<httplib::Client>(base.origin);
        client->set_connection_timeout(config.timeout_seconds, 0);
        client->set_read_timeout(config.timeout_seconds, 0);
        client->set_write_timeout(config.timeout_seconds, 0);
        if (!config.api_key.empty()) client->set_bearer_token_auth(config.api_key);
        return client;
    }

    CompletionResult complete(const CompletionRequest& request) {
        validate_request(request);
        json body;
        body["model"] = request.model_id;
        json messages = json::array();
        if (request.system_prompt)
            messages.push_back({{"role", "system"}, {"content", *request.system_prompt}});
        messages.push_back({{"role", "user"}, {"content", request.user_prompt}});
        body["messages"] = std::move(messages);
        body["temperature"] = request.temperature;
        body["top_p"] = request.top_p;
        if (request.max_tokens) body["max_tokens"] = *request.max_tokens;
        if (request.top_k) body["top_k"] = *request.top_k;
        const std::string payload = body.dump();
        const std::string path = base.prefix + "/chat/completions";

        throttle.acquire();
        struct Release {
            Throttle& t;
            ~Release() { t.release(); }
        } release{throttle};

        const auto started = std::chrono::steady_clock::now();
        auto elapsed = [&started] {
            return std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        };

        std::string last_error;
        int attempts = config.retry.max_retries + 1;
        double delay_ms = static_cast<double>(config.retry.base_delay_ms);
        for (int attempt = 0; attempt < attempts; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(
                    std::chrono::milliseconds(static_cast<long long>(delay_ms)));
                delay_ms *= config.retry.backoff_factor;
            }
            auto client = make_client();
            httplib::Result response = client->Post(path, payload, "application/json");
            if (!response) {
                last_error = httplib::to_string(response.error());
                continue;
            }
            if (response->status == 401 || response->status == 403) {
                throw AuthError("provider rejected credentials (HTTP " +
                                std::to_string(response->status) + ")");
            }
            if (response->status == 429) {
                last_error = "HTTP 429";
                continue;
            }
            if (response->status >= 500) {
                last_error = "HTTP " + std::to_string(response->status);
                continue;
            }
            if (response->status != 200) {
                throw TransportError("provider returned HTTP " + std::to_string(response->status) +
                                     ": " + response->body);
            }
            return parse_completion(request, response->body, elapsed());
        }
        if (last_error == "HTTP 429")
            throw RateLimited("rate limited after " + std::to_string(attempts) + " attempts");
        throw TransportError("request failed after " + std::to_string(attempts) +
                             " attempts: " + last_error);
    }

    CompletionResult parse_completion(const CompletionRequest& request, const std::string& body,
                                      double wall_time) const {
        json parsed;
        try {
            parsed = json::parse(body);
        } catch (const json::exception& e) {
            throw TransportError(std::string("provider returned malformed JSON: ") + e.what());
        }
        CompletionResult result;
        try {
            const json& choice = parsed.at("choices").at(0);
            const json& message = choice.at("message");
            if (message.contains("content") && !message.at("content").is_null())
                result.text = message.at("content").get<std::string>();
            std::string finish = choice.value("finish_reason", "stop");
            if (finish == "stop") result.finish_reason = FinishReason::Stop;
            else if (finish == "length") result.finish_reason = FinishReason::Length;
            else result.finish_reason = FinishReason::Error;
        } catch (const json::exception& e) {
            throw TransportError(std::string("provider response missing choices: ") + e.what());
        }
        if (parsed.contains("usage") && parsed.at("usage").is_object()) {
            const json& u = parsed.at("usage");
            result.usage.prompt_tokens = u.value("prompt_tokens", 0LL);
            result.usage.completion_tokens = u.value("completion_tokens", 0LL);
            result.usage.total_tokens =
                u.value("total_tokens", result.usage.prompt_tokens + result.usage.completion_tokens);
            result.usage_estimated = false;
        } else {
            result.usage = estimated_usage(request, result.text);
            result.usage_estimated = true;
        }
        result.usage.wall_time = wall_time;
        result.usage.call_count = 1;
        return result;
    }
};

HttpProvider::HttpProvider(HttpProviderConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpProvider::~HttpProvider() = default;

CompletionResult HttpProvider::complete(const CompletionRequest& request) {
    return impl_->complete(request);
}

}  // namespace rvcheck
