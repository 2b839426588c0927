#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace caesar {

enum class EdgeKind { Link, Search };
enum class NodeKind { Root, Page, Search };
enum class NodeStatus { Pending, Ok, Invalid };

const char* to_string(EdgeKind k);
const char* to_string(NodeKind k);
const char* to_string(NodeStatus s);

struct GraphNode {
    std::string url;
    NodeKind kind = NodeKind::Page;
    NodeStatus status = NodeStatus::Pending;
    std::int64_t depth = 0;
    std::int64_t visit_count = 0;
    std::int64_t created_step = 0;
    std::string title;
    std::vector<std::string> insights;  // one block per think step, oldest first

    bool operator==(const GraphNode&) const = default;
};

struct GraphEdge {
    std::string from;
    std::string to;
    EdgeKind kind = EdgeKind::Link;
    std::int64_t step = 0;

    bool operator==(const GraphEdge&) const = default;
};

// Directed navigation graph with a single root. Nodes keep insertion order.
class ExplorationGraph {
public:
    GraphNode& set_root(const std::string& url, NodeKind kind = NodeKind::Root);

    // Adds `url` as a child of `parent` at depth(parent)+1 plus the edge.
    // Throws Error{InvalidArgument} if parent is missing or url already exists.
    GraphNode& add_child(const std::string& parent, const std::string& url, EdgeKind kind, std::int64_t step);

    // Adds an extra edge between existing nodes (round-trip of arbitrary graphs).
    void add_edge(const GraphEdge& edge);
    // Raw node insertion, used when reading graphs back.
    GraphNode& insert_node(GraphNode node);

    // Renames a node in place (redirect to a final URL), rewriting its edges.
    void rename(const std::string& from, const std::string& to);

    bool has(const std::string& url) const { return index_.count(url) > 0; }
    GraphNode& node(const std::string& url);
    const GraphNode& node(const std::string& url) const;
    const std::vector<GraphNode>& nodes() const { return nodes_; }
    const std::vector<GraphEdge>& edges() const { return edges_; }
    const std::string& root() const { return root_; }
    std::size_t size() const { return nodes_.size(); }
    bool empty() const { return nodes_.empty(); }

    // Incoming-edge sources / outgoing targets in edge order.
    std::vector<std::string> parents(const std::string& url) const;
    std::vector<std::string> children(const std::string& url) const;

    nlohmann::json to_json() const;
    static ExplorationGraph from_json(const nlohmann::json& j);

    void save(const std::string& path) const;
    static ExplorationGraph load(const std::string& path);

private:
    std::vector<GraphNode> nodes_;
    std::vector<GraphEdge> edges_;
    std::map<std::string, std::size_t> index_;
    std::string root_;
};

}  // namespace caesar
