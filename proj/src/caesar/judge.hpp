#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "caesar/llm.hpp"
#include "caesar/mwu.hpp"

namespace caesar {

enum class Dimension { New, Useful, Surprising, Total };
const char* to_string(Dimension d);
Dimension dimension_from_string(const std::string& s);

struct JudgeScore {
    std::string agent_id;
    int new_score = 0;
    int useful = 0;
    int surprising = 0;

    int total() const { return new_score + useful + surprising; }
    double value(Dimension d) const;
    bool operator==(const JudgeScore&) const = default;
};

struct TrialSet {
    std::string query_id;
    std::string judge_id;
    int trial = 0;
    std::map<std::string, JudgeScore> scores;        // agent id -> score
    std::map<std::string, std::string> label_to_agent;
};

// "Agent A", "Agent B", ..., "Agent Z", "Agent AA", ...
std::string agent_label(std::size_t index);

// Shuffles agents onto labels with a seeded Fisher-Yates pass.
// Returns label -> agent id.
std::map<std::string, std::string> anonymize(const std::vector<std::string>& agent_ids, std::uint64_t seed);

// One "LABEL: new=<i> useful=<i> surprising=<i>" line per label; every label must
// appear with values in [1, 10]. Returns label -> score (agent_id = label).
std::optional<std::map<std::string, JudgeScore>> parse_scores(const std::string& response,
                                                              const std::vector<std::string>& labels);

struct JudgeBatch {
    std::vector<TrialSet> trials;
    std::vector<std::string> warnings;
};

// Seeds for trial t derive from (seed, query_id, judge_id, t).
JudgeBatch judge_batch(const std::string& query_id, const std::string& query,
                       const std::map<std::string, std::string>& answers, const std::string& judge_id, LlmGateway& llm,
                       int trials, std::uint64_t seed);

struct AgentMeans {
    double new_score = 0.0;
    double useful = 0.0;
    double surprising = 0.0;
    double total = 0.0;  // sum of the dimension means
    std::size_t count = 0;
};

std::map<std::string, AgentMeans> aggregate(const std::vector<TrialSet>& trials);

// mean(judge's scores on same-family agents) - mean(other judges' scores on those agents).
// Throws Error{UndefinedBias} when either side has no data.
double self_preference_bias(const std::vector<TrialSet>& trials, const std::map<std::string, std::string>& agent_family,
                            const std::string& judge_id, const std::string& judge_family,
                            Dimension dimension = Dimension::Total);

// Signed, two decimals: "+2.47", "-0.33", "+0.00".
std::string format_bias(double bias);

struct BiasCell {
    std::string judge;
    std::string column;  // e.g. a constraint or answer-length setting
    std::optional<double> bias;
};
// Markdown table, judges as rows, columns in first-appearance order; missing cells "n/a".
std::string format_bias_table(const std::vector<BiasCell>& cells);

std::string scores_csv(const std::vector<TrialSet>& trials);

struct MwuPair {
    std::string a;
    std::string b;
    MwuResult result;
};
// Pairwise tests on per-(judge, trial) totals, agents in sorted order.
std::vector<MwuPair> pairwise_mwu(const std::vector<TrialSet>& trials);

}  // namespace caesar
