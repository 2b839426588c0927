#include "caesar/judge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <regex>
#include <set>
#include <sstream>

#include "caesar/error.hpp"
#include "caesar/text.hpp"

namespace caesar {

const char* to_string(Dimension d) {
    switch (d) {
        case Dimension::New: return "new";
        case Dimension::Useful: return "useful";
        case Dimension::Surprising: return "surprising";
        case Dimension::Total: return "total";
    }
    return "total";
}

Dimension dimension_from_string(const std::string& s) {
    auto l = text::to_lower(s);
    if (l == "new") return Dimension::New;
    if (l == "useful") return Dimension::Useful;
    if (l == "surprising") return Dimension::Surprising;
    if (l == "total") return Dimension::Total;
    throw Error(ErrorCode::InvalidArgument, "unknown score dimension: " + s);
}

double JudgeScore::value(Dimension d) const {
    switch (d) {
        case Dimension::New: return new_score;
        case Dimension::Useful: return useful;
        case Dimension::Surprising: return surprising;
        case Dimension::Total: return total();
    }
    return total();
}

std::string agent_label(std::size_t index) {
    std::string letters;
    std::size_t i = index + 1;
    while (i > 0) {
        --i;
        letters.insert(letters.begin(), static_cast<char>('A' + i % 26));
        i /= 26;
    }
    return "Agent " + letters;
}

std::map<std::string, std::string> anonymize(const std::vector<std::string>& agent_ids, std::uint64_t seed) {
    std::vector<std::string> order = agent_ids;
    std::mt19937_64 rng(seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
    std::map<std::string, std::string> out;
    for (std::size_t i = 0; i < order.size(); ++i) out[agent_label(i)] = order[i];
    return out;
}

std::optional<std::map<std::string, JudgeScore>> parse_scores(const std::string& response,
                                                              const std::vector<std::string>& labels) {
    static const std::regex line_re(
        R"(^[\s*_#>-]*(Agent\s+[A-Z]+)[\s*_]*:[\s*_]*new\s*=\s*(\d+)[\s,;]+useful\s*=\s*(\d+)[\s,;]+surprising\s*=\s*(\d+))",
        std::regex::icase);
    std::map<std::string, JudgeScore> found;
    std::istringstream in(response);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_search(line, m, line_re)) continue;
        std::string label = text::collapse_whitespace(m[1].str());
        // Canonical case: "Agent X"
        std::string suffix = label.substr(label.find(' ') + 1);
        std::transform(suffix.begin(), suffix.end(), suffix.begin(), [](unsigned char c) { return std::toupper(c); });
        label = "Agent " + suffix;
        JudgeScore s;
        s.agent_id = label;
        try {
            s.new_score = std::stoi(m[2].str());
            s.useful = std::stoi(m[3].str());
            s.surprising = std::stoi(m[4].str());
        } catch (const std::exception&) {
            return std::nullopt;
        }
        for (int v : {s.new_score, s.useful, s.surprising}) {
            if (v < 1 || v > 10) return std::nullopt;
        }
        found.try_emplace(label, s);
    }
    std::map<std::string, JudgeScore> out;
    for (const auto& l : labels) {
        auto it = found.find(l);
        if (it == found.end()) return std::nullopt;
        out[l] = it->second;
    }
    return out;
}

JudgeBatch judge_batch(const std::string& query_id, const std::string& query,
                       const std::map<std::string, std::string>& answers, const std::string& judge_id, LlmGateway& llm,
                       int trials, std::uint64_t seed) {
    if (answers.size() < 2) throw Error(ErrorCode::InvalidArgument, "judging needs at least two answers");
    std::vector<std::string> agents;
    for (const auto& [id, text] : answers) agents.push_back(id);

    JudgeBatch batch;
    for (int t = 0; t < trials; ++t) {
        std::uint64_t trial_seed =
            seed ^ text::fnv1a64(query_id + '\x1f' + judge_id + '\x1f' + std::to_string(t));
        auto labels = anonymize(agents, trial_seed);
        std::vector<std::string> label_list;
        std::ostringstream block;
        for (const auto& [label, agent] : labels) {
            label_list.push_back(label);
            block << "#### " << label << "\n\n" << text::trim(answers.at(agent)) << "\n\n";
        }
        std::string prompt = render(TemplateId::JudgeRubric, {{"query", query}, {"answers", text::trim(block.str())}});
        std::optional<std::map<std::string, JudgeScore>> parsed;
        for (int attempt = 0; attempt < 2 && !parsed; ++attempt) {
            std::string p = prompt;
            if (attempt > 0) {
                p += "\n\nYour previous reply was missing score lines. Emit one line per answer label exactly as shown.";
            }
            try {
                auto res = llm.complete_request(llm.make_request(TemplateId::JudgeRubric, p, {}));
                parsed = parse_scores(res.text, label_list);
            } catch (const Error& e) {
                batch.warnings.push_back("judge " + judge_id + " trial " + std::to_string(t) + ": " + e.what());
                break;
            }
        }
        if (!parsed) {
            batch.warnings.push_back("judge " + judge_id + " trial " + std::to_string(t) +
                                     " discarded: unparseable score block");
            continue;
        }
        TrialSet ts;
        ts.query_id = query_id;
        ts.judge_id = judge_id;
        ts.trial = t;
        ts.label_to_agent = labels;
        for (const auto& [label, score] : *parsed) {
            JudgeScore s = score;
            s.agent_id = labels.at(label);
            ts.scores[s.agent_id] = s;
        }
        batch.trials.push_back(std::move(ts));
    }
    return batch;
}

std::map<std::string, AgentMeans> aggregate(const std::vector<TrialSet>& trials) {
    struct Sum {
        double n = 0, u = 0, s = 0;
        std::size_t c = 0;
    };
    std::map<std::string, Sum> sums;
    for (const auto& t : trials) {
        for (const auto& [agent, sc] : t.scores) {
            auto& x = sums[agent];
            x.n += sc.new_score;
            x.u += sc.useful;
            x.s += sc.surprising;
            ++x.c;
        }
    }
    std::map<std::string, AgentMeans> out;
    for (const auto& [agent, x] : sums) {
        AgentMeans m;
        m.count = x.c;
        m.new_score = x.n / static_cast<double>(x.c);
        m.useful = x.u / static_cast<double>(x.c);
        m.surprising = x.s / static_cast<double>(x.c);
        m.total = m.new_score + m.useful + m.surprising;
        out[agent] = m;
    }
    return out;
}

double self_preference_bias(const std::vector<TrialSet>& trials, const std::map<std::string, std::string>& agent_family,
                            const std::string& judge_id, const std::string& judge_family, Dimension dimension) {
    std::set<std::string> own;
    for (const auto& [agent, fam] : agent_family) {
        if (fam == judge_family) own.insert(agent);
    }
    if (own.empty()) {
        throw Error(ErrorCode::UndefinedBias, "no agent of family " + judge_family + " for judge " + judge_id);
    }
    double self_sum = 0, other_sum = 0;
    std::size_t self_n = 0, other_n = 0;
    for (const auto& t : trials) {
        for (const auto& [agent, sc] : t.scores) {
            if (!own.count(agent)) continue;
            if (t.judge_id == judge_id) {
                self_sum += sc.value(dimension);
                ++self_n;
            } else {
                other_sum += sc.value(dimension);
                ++other_n;
            }
        }
    }
    if (self_n == 0) throw Error(ErrorCode::UndefinedBias, "judge " + judge_id + " scored no same-family agent");
    if (other_n == 0) throw Error(ErrorCode::UndefinedBias, "no other judge scored the family " + judge_family + " agents");
    return self_sum / static_cast<double>(self_n) - other_sum / static_cast<double>(other_n);
}

std::string format_bias(double bias) {
    double r = std::round(bias * 100.0) / 100.0;
    if (r == 0.0) r = 0.0;  // no "-0.00"
    char buf[32];
    std::snprintf(buf, sizeof buf, "%+.2f", r);
    return buf;
}

std::string format_bias_table(const std::vector<BiasCell>& cells) {
    std::vector<std::string> judges, columns;
    std::map<std::pair<std::string, std::string>, std::optional<double>> grid;
    for (const auto& c : cells) {
        if (std::find(judges.begin(), judges.end(), c.judge) == judges.end()) judges.push_back(c.judge);
        if (std::find(columns.begin(), columns.end(), c.column) == columns.end()) columns.push_back(c.column);
        grid[{c.judge, c.column}] = c.bias;
    }
    std::ostringstream os;
    os << "| Judge |";
    for (const auto& c : columns) os << ' ' << c << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < columns.size(); ++i) os << "---|";
    os << '\n';
    for (const auto& j : judges) {
        os << "| " << j << " |";
        for (const auto& c : columns) {
            auto it = grid.find({j, c});
            os << ' ' << (it != grid.end() && it->second ? format_bias(*it->second) : std::string("n/a")) << " |";
        }
        os << '\n';
    }
    return os.str();
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

std::string scores_csv(const std::vector<TrialSet>& trials) {
    std::ostringstream os;
    os << "query,judge,trial,agent,new,useful,surprising,total\n";
    for (const auto& t : trials) {
        for (const auto& [agent, s] : t.scores) {
            os << csv_field(t.query_id) << ',' << csv_field(t.judge_id) << ',' << t.trial << ',' << csv_field(agent)
               << ',' << s.new_score << ',' << s.useful << ',' << s.surprising << ',' << s.total() << '\n';
        }
    }
    return os.str();
}

std::vector<MwuPair> pairwise_mwu(const std::vector<TrialSet>& trials) {
    std::map<std::string, std::vector<double>> totals;
    for (const auto& t : trials) {
        for (const auto& [agent, s] : t.scores) totals[agent].push_back(s.total());
    }
    std::vector<MwuPair> out;
    for (auto i = totals.begin(); i != totals.end(); ++i) {
        for (auto j = std::next(i); j != totals.end(); ++j) {
            out.push_back({i->first, j->first, mann_whitney_u(i->second, j->second)});
        }
    }
    return out;
}

}  // namespace caesar
