#include "caesar/graph.hpp"

#include <fstream>

#include "caesar/error.hpp"

namespace caesar {

using nlohmann::json;

const char* to_string(EdgeKind k) { return k == EdgeKind::Search ? "search" : "link"; }

const char* to_string(NodeKind k) {
    switch (k) {
        case NodeKind::Root: return "root";
        case NodeKind::Page: return "page";
        case NodeKind::Search: return "search";
    }
    return "page";
}

const char* to_string(NodeStatus s) {
    switch (s) {
        case NodeStatus::Pending: return "pending";
        case NodeStatus::Ok: return "ok";
        case NodeStatus::Invalid: return "invalid";
    }
    return "pending";
}

namespace {

EdgeKind edge_kind_from(const std::string& s) {
    if (s == "link") return EdgeKind::Link;
    if (s == "search") return EdgeKind::Search;
    throw Error(ErrorCode::Parse, "unknown edge kind: " + s);
}

NodeKind node_kind_from(const std::string& s) {
    if (s == "root") return NodeKind::Root;
    if (s == "page") return NodeKind::Page;
    if (s == "search") return NodeKind::Search;
    throw Error(ErrorCode::Parse, "unknown node kind: " + s);
}

NodeStatus node_status_from(const std::string& s) {
    if (s == "pending") return NodeStatus::Pending;
    if (s == "ok") return NodeStatus::Ok;
    if (s == "invalid") return NodeStatus::Invalid;
    throw Error(ErrorCode::Parse, "unknown node status: " + s);
}

}  // namespace

GraphNode& ExplorationGraph::set_root(const std::string& url, NodeKind kind) {
    if (!root_.empty()) throw Error(ErrorCode::InvalidArgument, "graph already has a root");
    GraphNode n;
    n.url = url;
    n.kind = kind;
    n.depth = 0;
    root_ = url;
    return insert_node(std::move(n));
}

GraphNode& ExplorationGraph::insert_node(GraphNode node) {
    if (node.url.empty()) throw Error(ErrorCode::InvalidArgument, "graph node needs a url");
    if (has(node.url)) throw Error(ErrorCode::InvalidArgument, "duplicate graph node " + node.url);
    index_[node.url] = nodes_.size();
    nodes_.push_back(std::move(node));
    return nodes_.back();
}

GraphNode& ExplorationGraph::add_child(const std::string& parent, const std::string& url, EdgeKind kind,
                                       std::int64_t step) {
    if (!has(parent)) throw Error(ErrorCode::InvalidArgument, "unknown parent node " + parent);
    GraphNode n;
    n.url = url;
    n.kind = kind == EdgeKind::Search ? NodeKind::Search : NodeKind::Page;
    n.depth = node(parent).depth + 1;
    n.created_step = step;
    GraphNode& added = insert_node(std::move(n));
    edges_.push_back({parent, url, kind, step});
    return added;
}

void ExplorationGraph::add_edge(const GraphEdge& edge) {
    if (!has(edge.from) || !has(edge.to)) {
        throw Error(ErrorCode::InvalidArgument, "edge endpoint missing: " + edge.from + " -> " + edge.to);
    }
    edges_.push_back(edge);
}

void ExplorationGraph::rename(const std::string& from, const std::string& to) {
    if (from == to) return;
    if (!has(from)) throw Error(ErrorCode::InvalidArgument, "unknown node " + from);
    if (has(to)) throw Error(ErrorCode::InvalidArgument, "node already exists: " + to);
    std::size_t i = index_.at(from);
    index_.erase(from);
    index_[to] = i;
    nodes_[i].url = to;
    for (auto& e : edges_) {
        if (e.from == from) e.from = to;
        if (e.to == from) e.to = to;
    }
    if (root_ == from) root_ = to;
}

GraphNode& ExplorationGraph::node(const std::string& url) {
    auto it = index_.find(url);
    if (it == index_.end()) throw Error(ErrorCode::InvalidArgument, "unknown node " + url);
    return nodes_[it->second];
}

const GraphNode& ExplorationGraph::node(const std::string& url) const {
    auto it = index_.find(url);
    if (it == index_.end()) throw Error(ErrorCode::InvalidArgument, "unknown node " + url);
    return nodes_[it->second];
}

std::vector<std::string> ExplorationGraph::parents(const std::string& url) const {
    std::vector<std::string> out;
    for (const auto& e : edges_) {
        if (e.to == url) out.push_back(e.from);
    }
    return out;
}

std::vector<std::string> ExplorationGraph::children(const std::string& url) const {
    std::vector<std::string> out;
    for (const auto& e : edges_) {
        if (e.from == url) out.push_back(e.to);
    }
    return out;
}

json ExplorationGraph::to_json() const {
    json nodes = json::array();
    for (const auto& n : nodes_) {
        nodes.push_back({{"url", n.url},
                         {"kind", to_string(n.kind)},
                         {"status", to_string(n.status)},
                         {"depth", n.depth},
                         {"visit_count", n.visit_count},
                         {"created_step", n.created_step},
                         {"title", n.title},
                         {"insights", n.insights}});
    }
    json edges = json::array();
    for (const auto& e : edges_) {
        edges.push_back({{"from", e.from}, {"to", e.to}, {"kind", to_string(e.kind)}, {"step", e.step}});
    }
    return {{"root", root_}, {"nodes", nodes}, {"edges", edges}};
}

ExplorationGraph ExplorationGraph::from_json(const json& j) {
    ExplorationGraph g;
    try {
        for (const auto& jn : j.at("nodes")) {
            GraphNode n;
            n.url = jn.at("url").get<std::string>();
            n.kind = node_kind_from(jn.value("kind", std::string("page")));
            n.status = node_status_from(jn.value("status", std::string("ok")));
            n.depth = jn.value("depth", std::int64_t{0});
            n.visit_count = jn.value("visit_count", std::int64_t{0});
            n.created_step = jn.value("created_step", std::int64_t{0});
            n.title = jn.value("title", std::string());
            if (auto it = jn.find("insights"); it != jn.end()) n.insights = it->get<std::vector<std::string>>();
            g.insert_node(std::move(n));
        }
        g.root_ = j.value("root", std::string());
        if (g.root_.empty() && !g.nodes_.empty()) g.root_ = g.nodes_.front().url;
        if (!g.root_.empty() && !g.has(g.root_)) throw Error(ErrorCode::Parse, "root is not a node: " + g.root_);
        for (const auto& je : j.at("edges")) {
            g.add_edge({je.at("from").get<std::string>(), je.at("to").get<std::string>(),
                        edge_kind_from(je.value("kind", std::string("link"))), je.value("step", std::int64_t{0})});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, std::string("malformed graph document: ") + e.what());
    }
    return g;
}

void ExplorationGraph::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
    out << to_json().dump(2) << '\n';
}

ExplorationGraph ExplorationGraph::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot read " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::Parse, "malformed graph file " + path);
    return from_json(j);
}

}  // namespace caesar
