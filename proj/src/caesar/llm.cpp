#include "caesar/llm.hpp"

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "caesar/http.hpp"
#include "caesar/text.hpp"

namespace caesar {

using nlohmann::json;

// ---------------------------------------------------------------------------
// ScriptedProvider

ScriptedProvider::ScriptedProvider(const json& fixture) {
    if (!fixture.is_object()) throw Error(ErrorCode::Parse, "scripted fixture must be a JSON object");
    auto check_template = [](const std::string& name) {
        if (name != "*" && !template_from_string(name)) {
            throw Error(ErrorCode::UnknownTemplate, "scripted fixture names unknown template '" + name + "'");
        }
    };
    if (auto it = fixture.find("responses"); it != fixture.end()) {
        for (const auto& [key, value] : it->items()) {
            check_template(key.substr(0, key.find('#')));
            exact_[key] = value.get<std::string>();
        }
    }
    if (auto it = fixture.find("sequences"); it != fixture.end()) {
        for (const auto& [key, value] : it->items()) {
            check_template(key);
            sequences_[key] = value.get<std::vector<std::string>>();
        }
    }
    if (auto it = fixture.find("defaults"); it != fixture.end()) {
        for (const auto& [key, value] : it->items()) {
            if (key == "*") {
                fallback_ = value.get<std::string>();
            } else {
                check_template(key);
                defaults_[key] = value.get<std::string>();
            }
        }
    }
    if (auto it = fixture.find("token_cost"); it != fixture.end()) {
        fixed_cost_ = std::make_pair(it->value("input", std::int64_t{0}), it->value("output", std::int64_t{0}));
    }
}

std::unique_ptr<ScriptedProvider> ScriptedProvider::from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read scripted fixture '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, "scripted fixture '" + path + "' is not valid JSON: " + e.what());
    }
    return std::make_unique<ScriptedProvider>(doc);
}

std::string ScriptedProvider::key_for(TemplateId id, const std::string& prompt) {
    return std::string(to_string(id)) + "#" + text::hex64(text::fnv1a64(prompt));
}

void ScriptedProvider::set_response(TemplateId id, const std::string& prompt, std::string text) {
    std::lock_guard lock(mu_);
    exact_[key_for(id, prompt)] = std::move(text);
}

void ScriptedProvider::push_sequence(TemplateId id, std::vector<std::string> texts) {
    std::lock_guard lock(mu_);
    auto& seq = sequences_[to_string(id)];
    seq.insert(seq.end(), std::make_move_iterator(texts.begin()), std::make_move_iterator(texts.end()));
}

void ScriptedProvider::set_default(TemplateId id, std::string text) {
    std::lock_guard lock(mu_);
    defaults_[to_string(id)] = std::move(text);
}

void ScriptedProvider::set_fallback(std::string text) {
    std::lock_guard lock(mu_);
    fallback_ = std::move(text);
}

void ScriptedProvider::set_fixed_cost(std::int64_t input_tokens, std::int64_t output_tokens) {
    std::lock_guard lock(mu_);
    fixed_cost_ = std::make_pair(input_tokens, output_tokens);
}

std::size_t ScriptedProvider::calls() const {
    std::lock_guard lock(mu_);
    return calls_;
}

ChatResponse ScriptedProvider::complete(const ChatRequest& request) {
    std::lock_guard lock(mu_);
    ++calls_;
    const std::string tid = to_string(request.template_id);
    std::optional<std::string> picked;
    if (auto it = exact_.find(key_for(request.template_id, request.user)); it != exact_.end()) {
        picked = it->second;
    }
    if (!picked) {
        if (auto it = sequences_.find(tid); it != sequences_.end()) {
            auto& pos = cursor_[tid];
            if (pos < it->second.size()) picked = it->second[pos++];
        }
    }
    if (!picked) {
        if (auto it = defaults_.find(tid); it != defaults_.end()) picked = it->second;
    }
    if (!picked && fallback_) picked = *fallback_;
    if (!picked) {
        throw Error(ErrorCode::NoScriptedResponse, "no scripted response for " + key_for(request.template_id, request.user));
    }
    ChatResponse out;
    out.text = *picked;
    if (fixed_cost_) {
        out.input_token_count = fixed_cost_->first;
        out.output_token_count = fixed_cost_->second;
    } else {
        out.input_token_count = text::approx_token_count(request.system) + text::approx_token_count(request.user);
        out.output_token_count = text::approx_token_count(out.text);
    }
    return out;
}

// ---------------------------------------------------------------------------
// OpenAiProvider

OpenAiSettings OpenAiSettings::from_env(const EnvLookup& env) {
    OpenAiSettings s;
    if (!env) return s;
    if (auto v = env("CAESAR_LLM_BASE_URL")) s.base_url = *v;
    if (auto v = env("CAESAR_LLM_API_KEY")) s.api_key = *v;
    else if (auto v2 = env("OPENAI_API_KEY")) s.api_key = *v2;
    if (auto v = env("CAESAR_LLM_MODEL")) s.model = *v;
    if (auto v = env("CAESAR_LLM_REASONING")) s.supports_reasoning_effort = !(*v == "0" || *v == "false");
    if (auto v = env("CAESAR_LLM_TIMEOUT")) s.timeout_s = std::stod(*v);
    return s;
}

OpenAiProvider::OpenAiProvider(OpenAiSettings settings) : settings_(std::move(settings)) {
    while (!settings_.base_url.empty() && settings_.base_url.back() == '/') settings_.base_url.pop_back();
}

json OpenAiProvider::build_body(const OpenAiSettings& settings, const ChatRequest& request) {
    json messages = json::array();
    if (!request.system.empty()) messages.push_back({{"role", "system"}, {"content", request.system}});
    messages.push_back({{"role", "user"}, {"content", request.user}});
    json body = {
        {"model", settings.model},
        {"messages", messages},
        {"temperature", request.temperature},
        {"max_completion_tokens", request.max_output_tokens},
    };
    if (settings.supports_reasoning_effort) body["reasoning_effort"] = to_string(request.reasoning_effort);
    return body;
}

ChatResponse OpenAiProvider::complete(const ChatRequest& request) {
    if (settings_.api_key.empty()) {
        throw Error(ErrorCode::CredentialMissing, "no API key configured for " + settings_.base_url +
                                                      " (set CAESAR_LLM_API_KEY or OPENAI_API_KEY)");
    }
    if (!settings_.supports_reasoning_effort) {
        static std::once_flag warned;
        std::call_once(warned, [] {
            std::cerr << "warning: provider lacks a reasoning-effort setting; dropping it\n";
        });
    }
    json body = build_body(settings_, request);
    http::Response res;
    try {
        res = http::request("POST", settings_.base_url + "/chat/completions",
                            {{"Authorization", "Bearer " + settings_.api_key}, {"Accept", "application/json"}},
                            body.dump(), "application/json", settings_.timeout_s);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::Transport) throw TransientError(ErrorCode::Transport, e.what());
        throw;
    }
    if (res.status == 429 || res.status >= 500) {
        throw TransientError(ErrorCode::ProviderStatus, "provider returned HTTP " + std::to_string(res.status));
    }
    if (res.status < 200 || res.status >= 300) {
        throw Error(ErrorCode::ProviderStatus,
                    "provider returned HTTP " + std::to_string(res.status) + ": " + res.body.substr(0, 300));
    }
    json doc = json::parse(res.body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || doc["choices"].empty()) {
        throw Error(ErrorCode::ProviderStatus, "malformed chat-completions response");
    }
    ChatResponse out;
    const auto& msg = doc["choices"][0]["message"];
    out.text = msg.contains("content") && msg["content"].is_string() ? msg["content"].get<std::string>() : "";
    if (auto u = doc.find("usage"); u != doc.end() && u->is_object()) {
        out.input_token_count = u->value("prompt_tokens", std::int64_t{0});
        out.output_token_count = u->value("completion_tokens", std::int64_t{0});
    } else {
        out.input_token_count = text::approx_token_count(request.system) + text::approx_token_count(request.user);
        out.output_token_count = text::approx_token_count(out.text);
    }
    return out;
}

// ---------------------------------------------------------------------------
// TokenLedger

void TokenLedger::record(LedgerEntry entry) {
    std::lock_guard lock(mu_);
    input_ += entry.input_tokens;
    output_ += entry.output_tokens;
    entries_.push_back(std::move(entry));
}

std::vector<LedgerEntry> TokenLedger::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

std::int64_t TokenLedger::total_input() const {
    std::lock_guard lock(mu_);
    return input_;
}

std::int64_t TokenLedger::total_output() const {
    std::lock_guard lock(mu_);
    return output_;
}

std::size_t TokenLedger::calls() const {
    std::lock_guard lock(mu_);
    return entries_.size();
}

json TokenLedger::summary() const {
    std::lock_guard lock(mu_);
    json per_template = json::object();
    for (const auto& e : entries_) {
        auto& slot = per_template[e.template_id];
        if (slot.is_null()) slot = {{"calls", 0}, {"input_tokens", 0}, {"output_tokens", 0}, {"retries", 0}};
        slot["calls"] = slot["calls"].get<std::int64_t>() + 1;
        slot["input_tokens"] = slot["input_tokens"].get<std::int64_t>() + e.input_tokens;
        slot["output_tokens"] = slot["output_tokens"].get<std::int64_t>() + e.output_tokens;
        slot["retries"] = slot["retries"].get<std::int64_t>() + e.retries;
    }
    return {{"calls", entries_.size()},
            {"input_tokens", input_},
            {"output_tokens", output_},
            {"total_tokens", input_ + output_},
            {"per_template", per_template}};
}

// ---------------------------------------------------------------------------
// LlmGateway

LlmGateway::LlmGateway(ChatProvider& provider, const Config& config, TokenLedger& ledger, RetryPolicy retry)
    : provider_(provider), config_(config), ledger_(ledger), retry_(retry) {}

ChatRequest LlmGateway::make_request(TemplateId id, const std::string& prompt, const std::string& system) const {
    ChatRequest req;
    req.template_id = id;
    req.system = system;
    req.user = prompt;
    req.max_output_tokens = config_.max_output_tokens;
    switch (phase_of(id)) {
        case Phase::Explore:
            req.temperature = config_.explore_temperature;
            req.reasoning_effort = config_.explore_reasoning;
            break;
        case Phase::Synthesis:
        case Phase::Judge:
            req.temperature = config_.synth_temperature;
            req.reasoning_effort = config_.synth_reasoning;
            break;
    }
    return req;
}

ChatResponse LlmGateway::complete(TemplateId id, const Bindings& bindings, const std::string& system) {
    return complete_request(make_request(id, render(id, bindings), system));
}

ChatResponse LlmGateway::complete_request(ChatRequest request) {
    if (request.max_output_tokens <= 0 || request.max_output_tokens > config_.max_output_tokens) {
        request.max_output_tokens = config_.max_output_tokens;
    }
    const int attempts = std::max(1, retry_.max_attempts);
    auto backoff = retry_.initial_backoff;
    for (int attempt = 0;; ++attempt) {
        try {
            ChatResponse res = provider_.complete(request);
            res.retry_count = attempt;
            ledger_.record({to_string(request.template_id), res.input_token_count, res.output_token_count, attempt});
            return res;
        } catch (const TransientError& e) {
            if (attempt + 1 >= attempts) {
                ledger_.record({to_string(request.template_id), 0, 0, attempt});
                throw Error(e.code(), std::string(e.what()) + " (after " + std::to_string(attempts) + " attempts)");
            }
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }
}

}  // namespace caesar
