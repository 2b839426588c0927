#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "caesar/graph.hpp"
#include "caesar/knowledge.hpp"

namespace caesar {

struct GraphStats {
    std::size_t node_count = 0;
    std::size_t edge_count = 0;
    std::int64_t max_depth = 0;
    std::map<std::int64_t, std::size_t> depth_histogram;
    double mean_branching = 0.0;  // mean out-degree over nodes with children
    std::size_t backtrack_count = 0;
    std::size_t search_edge_count = 0;
    std::vector<std::int64_t> cited_depths;  // in cited-URL order

    nlohmann::json to_json() const;
};

// Hop-count depth from the root for every node (BFS over edges).
std::map<std::string, std::int64_t> hop_depths(const ExplorationGraph& graph);

// `trace` holds trace.jsonl records; backtracks are those with action "backtrack".
// Cited URLs missing from the graph throw Error{Integrity}.
GraphStats compute_stats(const ExplorationGraph& graph, const std::vector<nlohmann::json>& trace = {},
                         const std::vector<std::string>& cited_urls = {});

enum class ExportFormat { Dot, GraphMl };
ExportFormat export_format_from_string(const std::string& s);  // throws Error{Unsupported}

// Dark-to-bright ramp, 8 steps.
const std::vector<std::string>& depth_palette();
std::string depth_color(std::int64_t depth, std::int64_t max_depth);
inline constexpr const char* kRootColor = "red";
inline constexpr const char* kCitedColor = "cyan";

std::string export_dot(const ExplorationGraph& graph, const std::set<std::string>& cited = {});
std::string export_graphml(const ExplorationGraph& graph, const std::set<std::string>& cited = {});
std::string export_graph(const ExplorationGraph& graph, ExportFormat format, const std::set<std::string>& cited = {});

// Node and edge sets read back from an export (node key = url attribute).
struct ParsedGraph {
    std::map<std::string, std::map<std::string, std::string>> nodes;  // url -> attributes
    std::set<std::pair<std::string, std::string>> edges;               // (from url, to url)
};
ParsedGraph parse_dot(const std::string& dot);
ParsedGraph parse_graphml(const std::string& xml);

// Tab-separated: header "id\te0\t...", then one row per entry.
std::string embeddings_tsv(const std::vector<KnowledgeEntry>& entries);
std::vector<std::pair<std::string, std::vector<double>>> read_embeddings_tsv(const std::string& tsv);

}  // namespace caesar
