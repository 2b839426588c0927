#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "caesar/config.hpp"
#include "caesar/error.hpp"
#include "caesar/prompts.hpp"

namespace caesar {

struct ChatRequest {
    TemplateId template_id = TemplateId::ThinkInsights;
    std::string system;  // role persona when set
    std::string user;    // rendered prompt
    double temperature = 0.0;
    ReasoningEffort reasoning_effort = ReasoningEffort::Low;
    std::int64_t max_output_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::int64_t input_token_count = 0;
    std::int64_t output_token_count = 0;
    int retry_count = 0;
};

// Marks a failure worth retrying (HTTP 429/5xx, dropped connections).
class TransientError : public Error {
public:
    using Error::Error;
};

class ChatProvider {
public:
    virtual ~ChatProvider() = default;
    virtual std::string name() const = 0;
    virtual ChatResponse complete(const ChatRequest& request) = 0;
};

// Replays fixture responses. Lookup order: exact (template, prompt hash),
// then the template's sequence (consumed in order), then the template default,
// then the "*" default. Thread-safe.
class ScriptedProvider : public ChatProvider {
public:
    ScriptedProvider() = default;
    explicit ScriptedProvider(const nlohmann::json& fixture);
    static std::unique_ptr<ScriptedProvider> from_file(const std::string& path);

    static std::string key_for(TemplateId id, const std::string& prompt);

    void set_response(TemplateId id, const std::string& prompt, std::string text);
    void push_sequence(TemplateId id, std::vector<std::string> texts);
    void set_default(TemplateId id, std::string text);
    void set_fallback(std::string text);
    // Every call reports these token counts instead of the word-based estimate.
    void set_fixed_cost(std::int64_t input_tokens, std::int64_t output_tokens);

    std::string name() const override { return "scripted"; }
    ChatResponse complete(const ChatRequest& request) override;

    std::size_t calls() const;

private:
    mutable std::mutex mu_;
    std::map<std::string, std::string> exact_;
    std::map<std::string, std::vector<std::string>> sequences_;
    std::map<std::string, std::size_t> cursor_;
    std::map<std::string, std::string> defaults_;
    std::optional<std::string> fallback_;
    std::optional<std::pair<std::int64_t, std::int64_t>> fixed_cost_;
    std::size_t calls_ = 0;
};

// Adapter over a callable; handy for tests that compute responses from prompts.
class CallbackProvider : public ChatProvider {
public:
    using Fn = std::function<ChatResponse(const ChatRequest&)>;
    explicit CallbackProvider(Fn fn, std::string name = "callback") : fn_(std::move(fn)), name_(std::move(name)) {}
    std::string name() const override { return name_; }
    ChatResponse complete(const ChatRequest& request) override { return fn_(request); }

private:
    Fn fn_;
    std::string name_;
};

struct OpenAiSettings {
    std::string base_url = "https://api.openai.com/v1";
    std::string api_key;
    std::string model = "gpt-5.2";
    bool supports_reasoning_effort = true;
    double timeout_s = 600.0;

    // CAESAR_LLM_BASE_URL, CAESAR_LLM_API_KEY (or OPENAI_API_KEY),
    // CAESAR_LLM_MODEL, CAESAR_LLM_REASONING=0 to drop the reasoning knob.
    static OpenAiSettings from_env(const EnvLookup& env);
};

// OpenAI-compatible chat-completions client.
class OpenAiProvider : public ChatProvider {
public:
    explicit OpenAiProvider(OpenAiSettings settings);
    std::string name() const override { return "openai-compatible:" + settings_.model; }
    ChatResponse complete(const ChatRequest& request) override;

    static nlohmann::json build_body(const OpenAiSettings& settings, const ChatRequest& request);

private:
    OpenAiSettings settings_;
};

struct LedgerEntry {
    std::string template_id;
    std::int64_t input_tokens = 0;
    std::int64_t output_tokens = 0;
    int retries = 0;
};

// Append-only token accounting shared by every completion in a run.
class TokenLedger {
public:
    void record(LedgerEntry entry);
    std::vector<LedgerEntry> entries() const;
    std::int64_t total_input() const;
    std::int64_t total_output() const;
    std::int64_t total() const { return total_input() + total_output(); }
    std::size_t calls() const;
    nlohmann::json summary() const;

private:
    mutable std::mutex mu_;
    std::vector<LedgerEntry> entries_;
    std::int64_t input_ = 0;
    std::int64_t output_ = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds initial_backoff{1000};
};

// Renders templates, applies phase settings, retries transient failures and
// books token usage.
class LlmGateway {
public:
    LlmGateway(ChatProvider& provider, const Config& config, TokenLedger& ledger, RetryPolicy retry = {});

    ChatResponse complete(TemplateId id, const Bindings& bindings, const std::string& system = {});
    ChatResponse complete_request(ChatRequest request);

    ChatRequest make_request(TemplateId id, const std::string& prompt, const std::string& system) const;

    ChatProvider& provider() { return provider_; }
    TokenLedger& ledger() { return ledger_; }

private:
    ChatProvider& provider_;
    const Config& config_;
    TokenLedger& ledger_;
    RetryPolicy retry_;
};

}  // namespace caesar
