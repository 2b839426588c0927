#include "caesar/graph_export.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <deque>
#include <sstream>

#include "caesar/error.hpp"
#include "caesar/text.hpp"

namespace caesar {

using nlohmann::json;

json GraphStats::to_json() const {
    json hist = json::object();
    for (const auto& [d, c] : depth_histogram) hist[std::to_string(d)] = c;
    return {{"node_count", node_count},
            {"edge_count", edge_count},
            {"max_depth", max_depth},
            {"depth_histogram", hist},
            {"mean_branching", mean_branching},
            {"backtrack_count", backtrack_count},
            {"search_edge_count", search_edge_count},
            {"cited_depths", cited_depths}};
}

std::map<std::string, std::int64_t> hop_depths(const ExplorationGraph& graph) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& e : graph.edges()) adj[e.from].push_back(e.to);
    std::map<std::string, std::int64_t> depth;
    if (graph.root().empty()) return depth;
    std::deque<std::string> q{graph.root()};
    depth[graph.root()] = 0;
    while (!q.empty()) {
        auto u = q.front();
        q.pop_front();
        for (const auto& v : adj[u]) {
            if (depth.count(v)) continue;
            depth[v] = depth[u] + 1;
            q.push_back(v);
        }
    }
    // Unreachable nodes (not produced by the explorer) keep their recorded depth.
    for (const auto& n : graph.nodes()) depth.try_emplace(n.url, n.depth);
    return depth;
}

GraphStats compute_stats(const ExplorationGraph& graph, const std::vector<json>& trace,
                         const std::vector<std::string>& cited_urls) {
    if (graph.root().empty()) throw Error(ErrorCode::InvalidArgument, "graph has no root");
    GraphStats s;
    s.node_count = graph.size();
    s.edge_count = graph.edges().size();
    auto depth = hop_depths(graph);
    for (const auto& [url, d] : depth) {
        ++s.depth_histogram[d];
        s.max_depth = std::max(s.max_depth, d);
    }
    std::map<std::string, std::size_t> out_degree;
    for (const auto& e : graph.edges()) {
        ++out_degree[e.from];
        if (e.kind == EdgeKind::Search) ++s.search_edge_count;
    }
    if (!out_degree.empty()) {
        s.mean_branching = static_cast<double>(s.edge_count) / static_cast<double>(out_degree.size());
    }
    for (const auto& t : trace) {
        auto a = t.find("action");
        if (a != t.end() && a->is_string() && a->get<std::string>() == "backtrack") ++s.backtrack_count;
    }
    for (const auto& u : cited_urls) {
        auto it = depth.find(u);
        if (it == depth.end()) throw Error(ErrorCode::Integrity, "cited source is not a graph node: " + u);
        s.cited_depths.push_back(it->second);
    }
    return s;
}

ExportFormat export_format_from_string(const std::string& s) {
    auto l = text::to_lower(s);
    if (l == "dot" || l == "gv") return ExportFormat::Dot;
    if (l == "graphml") return ExportFormat::GraphMl;
    throw Error(ErrorCode::Unsupported, "unsupported export format: " + s);
}

const std::vector<std::string>& depth_palette() {
    static const std::vector<std::string> p = {"#440154", "#46327e", "#365c8d", "#277f8e",
                                               "#1fa187", "#4ac16d", "#a0da39", "#fde725"};
    return p;
}

std::string depth_color(std::int64_t depth, std::int64_t max_depth) {
    const auto& p = depth_palette();
    if (max_depth <= 0 || depth <= 0) return p.front();
    double t = std::min(1.0, static_cast<double>(depth) / static_cast<double>(max_depth));
    auto idx = static_cast<std::size_t>(std::lround(t * static_cast<double>(p.size() - 1)));
    return p[idx];
}

namespace {

struct NodeView {
    std::string id;
    const GraphNode* node;
    std::int64_t depth;
    std::string color;
    bool cited;
};

std::vector<NodeView> node_views(const ExplorationGraph& graph, const std::set<std::string>& cited) {
    if (graph.empty()) throw Error(ErrorCode::InvalidArgument, "cannot export an empty graph");
    auto depth = hop_depths(graph);
    std::int64_t max_depth = 0;
    for (const auto& [u, d] : depth) max_depth = std::max(max_depth, d);
    std::vector<NodeView> out;
    std::size_t i = 0;
    for (const auto& n : graph.nodes()) {
        NodeView v{"n" + std::to_string(i++), &n, depth.at(n.url), {}, cited.count(n.url) > 0};
        if (n.url == graph.root()) v.color = kRootColor;
        else if (v.cited) v.color = kCitedColor;
        else v.color = depth_color(v.depth, max_depth);
        out.push_back(std::move(v));
    }
    return out;
}

std::string dot_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out += '\\';
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out += c;
    }
    return out + "\"";
}

std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&apos;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string short_label(const std::string& url) {
    std::string s = url;
    for (const char* p : {"https://", "http://"}) {
        if (s.rfind(p, 0) == 0) s = s.substr(std::char_traits<char>::length(p));
    }
    if (s.size() > 60) s = s.substr(0, 57) + "...";
    return s;
}

}  // namespace

std::string export_dot(const ExplorationGraph& graph, const std::set<std::string>& cited) {
    auto views = node_views(graph, cited);
    std::map<std::string, std::string> id_of;
    for (const auto& v : views) id_of[v.node->url] = v.id;
    std::ostringstream os;
    os << "digraph exploration {\n  node [style=filled, fontcolor=\"white\"];\n";
    for (const auto& v : views) {
        os << "  " << v.id << " [label=" << dot_quote(short_label(v.node->url)) << ", url=" << dot_quote(v.node->url)
           << ", depth=" << v.depth << ", kind=" << dot_quote(to_string(v.node->kind))
           << ", cited=" << (v.cited ? "true" : "false") << ", color=" << dot_quote(v.color)
           << ", fillcolor=" << dot_quote(v.color) << "];\n";
    }
    for (const auto& e : graph.edges()) {
        os << "  " << id_of.at(e.from) << " -> " << id_of.at(e.to) << " [kind=" << dot_quote(to_string(e.kind))
           << ", step=" << e.step << "];\n";
    }
    os << "}\n";
    return os.str();
}

std::string export_graphml(const ExplorationGraph& graph, const std::set<std::string>& cited) {
    auto views = node_views(graph, cited);
    std::map<std::string, std::string> id_of;
    for (const auto& v : views) id_of[v.node->url] = v.id;
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
          "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\" "
          "xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\" "
          "xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns "
          "http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n"
          "  <key id=\"d0\" for=\"node\" attr.name=\"url\" attr.type=\"string\"/>\n"
          "  <key id=\"d1\" for=\"node\" attr.name=\"depth\" attr.type=\"int\"/>\n"
          "  <key id=\"d2\" for=\"node\" attr.name=\"color\" attr.type=\"string\"/>\n"
          "  <key id=\"d3\" for=\"node\" attr.name=\"cited\" attr.type=\"boolean\"/>\n"
          "  <key id=\"d4\" for=\"node\" attr.name=\"kind\" attr.type=\"string\"/>\n"
          "  <key id=\"d5\" for=\"edge\" attr.name=\"kind\" attr.type=\"string\"/>\n"
          "  <key id=\"d6\" for=\"edge\" attr.name=\"step\" attr.type=\"int\"/>\n"
          "  <graph id=\"exploration\" edgedefault=\"directed\">\n";
    for (const auto& v : views) {
        os << "    <node id=\"" << v.id << "\">\n"
           << "      <data key=\"d0\">" << xml_escape(v.node->url) << "</data>\n"
           << "      <data key=\"d1\">" << v.depth << "</data>\n"
           << "      <data key=\"d2\">" << xml_escape(v.color) << "</data>\n"
           << "      <data key=\"d3\">" << (v.cited ? "true" : "false") << "</data>\n"
           << "      <data key=\"d4\">" << to_string(v.node->kind) << "</data>\n"
           << "    </node>\n";
    }
    std::size_t i = 0;
    for (const auto& e : graph.edges()) {
        os << "    <edge id=\"e" << i++ << "\" source=\"" << id_of.at(e.from) << "\" target=\"" << id_of.at(e.to)
           << "\">\n      <data key=\"d5\">" << to_string(e.kind) << "</data>\n      <data key=\"d6\">" << e.step
           << "</data>\n    </edge>\n";
    }
    os << "  </graph>\n</graphml>\n";
    return os.str();
}

std::string export_graph(const ExplorationGraph& graph, ExportFormat format, const std::set<std::string>& cited) {
    return format == ExportFormat::Dot ? export_dot(graph, cited) : export_graphml(graph, cited);
}

// ---------------------------------------------------------------------------
// Readers

namespace {

struct DotToken {
    enum Kind { Id, Punct, Arrow, End } kind;
    std::string text;
};

std::vector<DotToken> dot_tokens(const std::string& s) {
    std::vector<DotToken> out;
    std::size_t i = 0;
    while (i < s.size()) {
        char c = s[i];
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
        } else if (c == '/' && i + 1 < s.size() && s[i + 1] == '/') {
            while (i < s.size() && s[i] != '\n') ++i;
        } else if (c == '/' && i + 1 < s.size() && s[i + 1] == '*') {
            auto e = s.find("*/", i + 2);
            i = e == std::string::npos ? s.size() : e + 2;
        } else if (c == '#' && (i == 0 || s[i - 1] == '\n')) {
            while (i < s.size() && s[i] != '\n') ++i;
        } else if (c == '"') {
            std::string v;
            ++i;
            while (i < s.size() && s[i] != '"') {
                if (s[i] == '\\' && i + 1 < s.size()) {
                    char n = s[i + 1];
                    if (n == '"' || n == '\\') v += n;
                    else if (n == 'n') v += '\n';
                    else if (n == '\n') { /* line continuation */ }
                    else { v += '\\'; v += n; }
                    i += 2;
                } else {
                    v += s[i++];
                }
            }
            if (i >= s.size()) throw Error(ErrorCode::Parse, "unterminated string in DOT");
            ++i;
            out.push_back({DotToken::Id, v});
        } else if (c == '-' && i + 1 < s.size() && (s[i + 1] == '>' || s[i + 1] == '-')) {
            out.push_back({DotToken::Arrow, s.substr(i, 2)});
            i += 2;
        } else if (std::string("{}[];=,:").find(c) != std::string::npos) {
            out.push_back({DotToken::Punct, std::string(1, c)});
            ++i;
        } else if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-' ||
                   static_cast<unsigned char>(c) >= 0x80) {
            std::size_t j = i;
            while (j < s.size() && (std::isalnum(static_cast<unsigned char>(s[j])) || s[j] == '_' || s[j] == '.' ||
                                    (s[j] == '-' && !(j + 1 < s.size() && (s[j + 1] == '>' || s[j + 1] == '-'))) ||
                                    static_cast<unsigned char>(s[j]) >= 0x80)) {
                ++j;
            }
            out.push_back({DotToken::Id, s.substr(i, j - i)});
            i = j;
        } else {
            throw Error(ErrorCode::Parse, std::string("unexpected character in DOT: ") + c);
        }
    }
    out.push_back({DotToken::End, {}});
    return out;
}

}  // namespace

ParsedGraph parse_dot(const std::string& dot) {
    auto toks = dot_tokens(dot);
    std::size_t i = 0;
    auto expect = [&](const std::string& p) {
        if (toks[i].kind != DotToken::Punct || toks[i].text != p) {
            throw Error(ErrorCode::Parse, "DOT: expected '" + p + "' near '" + toks[i].text + "'");
        }
        ++i;
    };
    auto is_punct = [&](const std::string& p) { return toks[i].kind == DotToken::Punct && toks[i].text == p; };
    auto attrs = [&]() {
        std::map<std::string, std::string> a;
        while (is_punct("[")) {
            ++i;
            while (!is_punct("]")) {
                if (toks[i].kind != DotToken::Id) throw Error(ErrorCode::Parse, "DOT: bad attribute list");
                std::string k = toks[i++].text;
                std::string v = "true";
                if (is_punct("=")) {
                    ++i;
                    if (toks[i].kind != DotToken::Id) throw Error(ErrorCode::Parse, "DOT: bad attribute value");
                    v = toks[i++].text;
                }
                a[k] = v;
                if (is_punct(",") || is_punct(";")) ++i;
            }
            ++i;
        }
        return a;
    };

    if (toks[i].kind == DotToken::Id && text::to_lower(toks[i].text) == "strict") ++i;
    if (toks[i].kind != DotToken::Id || (text::to_lower(toks[i].text) != "digraph" && text::to_lower(toks[i].text) != "graph")) {
        throw Error(ErrorCode::Parse, "DOT: expected digraph");
    }
    ++i;
    if (toks[i].kind == DotToken::Id) ++i;
    expect("{");

    std::map<std::string, std::map<std::string, std::string>> by_id;
    std::vector<std::string> order;
    std::vector<std::pair<std::string, std::string>> raw_edges;
    auto touch = [&](const std::string& id) {
        if (!by_id.count(id)) {
            by_id[id] = {};
            order.push_back(id);
        }
    };
    while (!is_punct("}")) {
        if (toks[i].kind == DotToken::End) throw Error(ErrorCode::Parse, "DOT: missing '}'");
        if (is_punct(";")) {
            ++i;
            continue;
        }
        if (toks[i].kind != DotToken::Id) throw Error(ErrorCode::Parse, "DOT: unexpected '" + toks[i].text + "'");
        std::string first = toks[i++].text;
        auto lower = text::to_lower(first);
        if ((lower == "node" || lower == "edge" || lower == "graph") && is_punct("[")) {
            attrs();
            continue;
        }
        if (is_punct("=")) {  // graph attribute
            ++i;
            ++i;
            continue;
        }
        if (toks[i].kind == DotToken::Arrow) {
            std::vector<std::string> chain{first};
            while (toks[i].kind == DotToken::Arrow) {
                ++i;
                if (toks[i].kind != DotToken::Id) throw Error(ErrorCode::Parse, "DOT: edge target missing");
                chain.push_back(toks[i++].text);
            }
            attrs();
            for (const auto& id : chain) touch(id);
            for (std::size_t k = 0; k + 1 < chain.size(); ++k) raw_edges.emplace_back(chain[k], chain[k + 1]);
        } else {
            touch(first);
            for (auto& [k, v] : attrs()) by_id[first][k] = v;
        }
    }
    ParsedGraph g;
    auto key = [&](const std::string& id) {
        auto it = by_id[id].find("url");
        return it != by_id[id].end() ? it->second : id;
    };
    for (const auto& id : order) g.nodes[key(id)] = by_id[id];
    for (const auto& [a, b] : raw_edges) g.edges.insert({key(a), key(b)});
    return g;
}

namespace {

std::string xml_unescape(const std::string& s) {
    std::string out;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '&') {
            out += s[i];
            continue;
        }
        auto semi = s.find(';', i);
        if (semi == std::string::npos) throw Error(ErrorCode::Parse, "GraphML: bad entity");
        std::string ent = s.substr(i + 1, semi - i - 1);
        if (ent == "amp") out += '&';
        else if (ent == "lt") out += '<';
        else if (ent == "gt") out += '>';
        else if (ent == "quot") out += '"';
        else if (ent == "apos") out += '\'';
        else if (!ent.empty() && ent[0] == '#') {
            unsigned long cp = ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X') ? std::stoul(ent.substr(2), nullptr, 16)
                                                                                 : std::stoul(ent.substr(1));
            if (cp < 0x80) out += static_cast<char>(cp);
            else if (cp < 0x800) {
                out += static_cast<char>(0xC0 | (cp >> 6));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            } else if (cp < 0x10000) {
                out += static_cast<char>(0xE0 | (cp >> 12));
                out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            } else {
                out += static_cast<char>(0xF0 | (cp >> 18));
                out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
                out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
                out += static_cast<char>(0x80 | (cp & 0x3F));
            }
        } else {
            throw Error(ErrorCode::Parse, "GraphML: unknown entity &" + ent + ";");
        }
        i = semi;
    }
    return out;
}

struct XmlTag {
    std::string name;
    std::map<std::string, std::string> attrs;
    bool closing = false;
    bool self_closing = false;
};

XmlTag parse_tag(const std::string& body) {
    XmlTag t;
    std::size_t i = 0;
    if (i < body.size() && body[i] == '/') {
        t.closing = true;
        ++i;
    }
    std::size_t j = i;
    while (j < body.size() && !std::isspace(static_cast<unsigned char>(body[j])) && body[j] != '/') ++j;
    t.name = body.substr(i, j - i);
    if (auto c = t.name.find(':'); c != std::string::npos) t.name = t.name.substr(c + 1);
    i = j;
    while (i < body.size()) {
        if (std::isspace(static_cast<unsigned char>(body[i]))) {
            ++i;
            continue;
        }
        if (body[i] == '/') {
            t.self_closing = true;
            ++i;
            continue;
        }
        auto eq = body.find('=', i);
        if (eq == std::string::npos) throw Error(ErrorCode::Parse, "GraphML: malformed attribute");
        std::string name = text::trim(body.substr(i, eq - i));
        std::size_t q = eq + 1;
        while (q < body.size() && std::isspace(static_cast<unsigned char>(body[q]))) ++q;
        if (q >= body.size() || (body[q] != '"' && body[q] != '\'')) {
            throw Error(ErrorCode::Parse, "GraphML: unquoted attribute");
        }
        char quote = body[q];
        auto end = body.find(quote, q + 1);
        if (end == std::string::npos) throw Error(ErrorCode::Parse, "GraphML: unterminated attribute");
        t.attrs[name] = xml_unescape(body.substr(q + 1, end - q - 1));
        i = end + 1;
    }
    return t;
}

}  // namespace

ParsedGraph parse_graphml(const std::string& xml) {
    std::map<std::string, std::string> key_name;  // key id -> attr.name
    std::map<std::string, std::map<std::string, std::string>> by_id;
    std::vector<std::string> order;
    std::vector<std::pair<std::string, std::string>> raw_edges;
    std::vector<std::string> open;
    std::string current_node;
    std::string current_key;
    std::string text_buf;
    bool saw_root = false;

    std::size_t i = 0;
    while (i < xml.size()) {
        auto lt = xml.find('<', i);
        if (lt == std::string::npos) {
            if (!text::trim(xml.substr(i)).empty()) throw Error(ErrorCode::Parse, "GraphML: trailing text");
            break;
        }
        text_buf += xml.substr(i, lt - i);
        if (xml.compare(lt, 4, "<!--") == 0) {
            auto e = xml.find("-->", lt);
            if (e == std::string::npos) throw Error(ErrorCode::Parse, "GraphML: unterminated comment");
            i = e + 3;
            continue;
        }
        if (xml.compare(lt, 2, "<?") == 0) {
            auto e = xml.find("?>", lt);
            if (e == std::string::npos) throw Error(ErrorCode::Parse, "GraphML: unterminated declaration");
            i = e + 2;
            continue;
        }
        auto gt = xml.find('>', lt);
        if (gt == std::string::npos) throw Error(ErrorCode::Parse, "GraphML: unterminated tag");
        XmlTag tag = parse_tag(xml.substr(lt + 1, gt - lt - 1));
        i = gt + 1;
        if (tag.closing) {
            if (open.empty() || open.back() != tag.name) throw Error(ErrorCode::Parse, "GraphML: mismatched </" + tag.name + ">");
            open.pop_back();
            if (tag.name == "data" && !current_node.empty()) {
                auto it = key_name.find(current_key);
                std::string name = it != key_name.end() ? it->second : current_key;
                by_id[current_node][name] = xml_unescape(text_buf);
            }
            if (tag.name == "node") current_node.clear();
            text_buf.clear();
            continue;
        }
        text_buf.clear();
        if (open.empty()) {
            if (tag.name != "graphml" || saw_root) throw Error(ErrorCode::Parse, "GraphML: root element must be <graphml>");
            saw_root = true;
        }
        if (tag.name == "key") {
            key_name[tag.attrs["id"]] = tag.attrs.count("attr.name") ? tag.attrs["attr.name"] : tag.attrs["id"];
        } else if (tag.name == "node") {
            auto id = tag.attrs["id"];
            if (id.empty()) throw Error(ErrorCode::Parse, "GraphML: node without id");
            if (!by_id.count(id)) order.push_back(id);
            by_id[id];
            current_node = tag.self_closing ? std::string() : id;
        } else if (tag.name == "edge") {
            if (!tag.attrs.count("source") || !tag.attrs.count("target")) {
                throw Error(ErrorCode::Parse, "GraphML: edge without endpoints");
            }
            raw_edges.emplace_back(tag.attrs["source"], tag.attrs["target"]);
        } else if (tag.name == "data") {
            current_key = tag.attrs["key"];
        }
        if (!tag.self_closing) open.push_back(tag.name);
    }
    if (!open.empty()) throw Error(ErrorCode::Parse, "GraphML: unclosed <" + open.back() + ">");
    if (!saw_root) throw Error(ErrorCode::Parse, "GraphML: no <graphml> element");

    ParsedGraph g;
    auto key = [&](const std::string& id) {
        auto it = by_id[id].find("url");
        return it != by_id[id].end() ? it->second : id;
    };
    for (const auto& id : order) g.nodes[key(id)] = by_id[id];
    for (const auto& [a, b] : raw_edges) {
        if (!by_id.count(a) || !by_id.count(b)) throw Error(ErrorCode::Parse, "GraphML: edge to unknown node");
        g.edges.insert({key(a), key(b)});
    }
    return g;
}

// ---------------------------------------------------------------------------

std::string embeddings_tsv(const std::vector<KnowledgeEntry>& entries) {
    if (entries.empty()) throw Error(ErrorCode::EmptyKnowledgeBase, "knowledge base empty");
    const std::size_t d = entries.front().embedding.size();
    std::ostringstream os;
    os << "id";
    for (std::size_t k = 0; k < d; ++k) os << "\te" << k;
    os << '\n';
    char buf[40];
    for (const auto& e : entries) {
        if (e.embedding.size() != d) throw Error(ErrorCode::Integrity, "mixed embedding dimensions in KB");
        os << e.entry_id;
        for (double x : e.embedding) {
            std::snprintf(buf, sizeof buf, "\t%.17g", x);
            os << buf;
        }
        os << '\n';
    }
    return os.str();
}

std::vector<std::pair<std::string, std::vector<double>>> read_embeddings_tsv(const std::string& tsv) {
    std::vector<std::pair<std::string, std::vector<double>>> out;
    std::istringstream in(tsv);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (header) {
            header = false;
            if (line.rfind("id\t", 0) == 0 || line == "id") continue;
        }
        std::istringstream row(line);
        std::string cell;
        std::getline(row, cell, '\t');
        std::pair<std::string, std::vector<double>> r{cell, {}};
        while (std::getline(row, cell, '\t')) r.second.push_back(std::stod(cell));
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace caesar
