#include <doctest.h>

#include <map>

#include "caesar/config.hpp"
#include "caesar/error.hpp"

using namespace caesar;

namespace {

EnvLookup map_env(std::map<std::string, std::string> m) {
    return [m](const std::string& k) -> std::optional<std::string> {
        auto it = m.find(k);
        if (it == m.end()) return std::nullopt;
        return it->second;
    };
}

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return ErrorCode::Integrity;
}

}  // namespace

TEST_CASE("empty source yields the published defaults") {
    Config c = load_config("");
    CHECK(c.exploration_budget == 1000);
    CHECK(c.refinement_rounds == 3);
    CHECK(c.insight_budget == 30);
    CHECK(c.retrieve_k == 50);
    CHECK(c.rerank_n == 10);
    CHECK(c.max_citations_per_claim == 5);
    CHECK(c.neighbor_context == 5);
    CHECK(c.chunk_size == 400);
    CHECK(c.chunk_overlap == 80);
    CHECK(c.explore_temperature == 0.9);
    CHECK(c.synth_temperature == 0.1);
    CHECK(c.max_page_chars == 100000);
    CHECK(c.max_links_per_page == 2000);
    CHECK(c.max_revisits == 20);
    CHECK(c.max_web_searches == 30);
    CHECK(c.max_qa_history == 50);
    CHECK(c.max_depth == 10000);
    CHECK(c.max_output_tokens == 50000);
    CHECK(c.explore_reasoning == ReasoningEffort::Low);
    CHECK(c.synth_reasoning == ReasoningEffort::High);
}

TEST_CASE("overlap equal to chunk size is rejected") {
    CHECK(code_of([] { load_config(R"({"chunk_overlap": 400, "chunk_size": 400})"); }) == ErrorCode::Validation);
    CHECK_NOTHROW(load_config(R"({"chunk_overlap": 399, "chunk_size": 400})"));
}

TEST_CASE("single key override leaves everything else at defaults") {
    Config expected;
    expected.exploration_budget = 10;
    CHECK(load_config(R"({"exploration_budget": 10})") == expected);
    CHECK(load_config(R"({"T": 10})") == expected);
}

TEST_CASE("round trip through JSON") {
    Config a = load_config("");
    Config b = load_config(to_json(a).dump());
    CHECK(a == b);

    Config c;
    c.user_query = "q \"quoted\"";
    c.allowed_domains = {"example.org"};
    c.eli5_word_limit = 450;
    c.synth_reasoning = ReasoningEffort::Medium;
    CHECK(load_config(to_json(c).dump()) == c);
}

TEST_CASE("validation errors name the key") {
    try {
        load_config(R"({"explore_temperature": 3.5})");
        FAIL("expected validation error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Validation);
        CHECK(std::string(e.what()).find("explore_temperature") != std::string::npos);
    }
    CHECK(code_of([] { load_config(R"({"no_such_key": 1})"); }) == ErrorCode::Validation);
    CHECK(code_of([] { load_config(R"({"refinement_rounds": 0})"); }) == ErrorCode::Validation);
    CHECK(code_of([] { load_config(R"({"exploration_budget": -1})"); }) == ErrorCode::Validation);
    CHECK(code_of([] { load_config("{not json"); }) == ErrorCode::Parse);
    CHECK(code_of([] { load_config(R"({"T": 5, "exploration_budget": 6})"); }) == ErrorCode::Validation);
}

TEST_CASE("zero exploration budget is legal") {
    CHECK(load_config(R"({"T": 0})").exploration_budget == 0);
}

TEST_CASE("environment overrides apply after the file") {
    auto env = map_env({{"CAESAR_EXPLORATION_BUDGET", "42"}, {"CAESAR_SYNTH_REASONING", "medium"},
                        {"CAESAR_N", "2"}});
    Config c = load_config(R"({"exploration_budget": 7})", env);
    CHECK(c.exploration_budget == 42);
    CHECK(c.synth_reasoning == ReasoningEffort::Medium);
    CHECK(c.refinement_rounds == 2);

    auto bad = map_env({{"CAESAR_CHUNK_OVERLAP", "500"}});
    CHECK(code_of([&] { load_config("", bad); }) == ErrorCode::Validation);
}

TEST_CASE("config_keys are in serialization order and all settable") {
    Config c;
    auto j = to_json(c);
    CHECK(j.size() == config_keys().size());
    for (const auto& k : config_keys()) {
        CHECK(j.contains(k));
        Config d;
        CHECK_NOTHROW(set_config_value(d, k, j[k]));
        CHECK(d == c);
    }
}

TEST_CASE("manifest serialization round trip") {
    RunManifest m;
    m.run_id = new_run_id();
    m.created_at = utc_timestamp();
    m.config_snapshot = to_json(Config{});
    m.providers = {{"llm", "scripted"}};
    m.artifacts = {"graph.json"};
    m.seed = 7;
    auto back = manifest_from_json(to_json(m));
    CHECK(back.run_id == m.run_id);
    CHECK(back.created_at == m.created_at);
    CHECK(back.status == "incomplete");
    CHECK(back.artifacts == m.artifacts);
    CHECK(back.providers == m.providers);
    CHECK(back.seed == 7);
    CHECK(m.created_at.size() == 20);
    CHECK(m.created_at.back() == 'Z');
}
