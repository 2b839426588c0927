#include <doctest.h>

#include "caesar/error.hpp"
#include "caesar/graph.hpp"
#include "caesar/graph_export.hpp"
#include "testkit.hpp"

using namespace caesar;

namespace {

ExplorationGraph path_graph(int n) {
    ExplorationGraph g;
    g.set_root("u0").status = NodeStatus::Ok;
    for (int i = 1; i < n; ++i) g.add_child("u" + std::to_string(i - 1), "u" + std::to_string(i), EdgeKind::Link, i);
    return g;
}

}  // namespace

TEST_CASE("graph construction rules") {
    ExplorationGraph g;
    g.set_root("r");
    g.add_child("r", "a", EdgeKind::Link, 1);
    g.add_child("a", "b", EdgeKind::Search, 2);
    CHECK(g.node("b").depth == 2);
    CHECK(g.parents("b") == std::vector<std::string>{"a"});
    CHECK(g.children("r") == std::vector<std::string>{"a"});
    CHECK_THROWS_AS(g.add_child("r", "a", EdgeKind::Link, 3), Error);
    CHECK_THROWS_AS(g.add_child("zzz", "c", EdgeKind::Link, 3), Error);
    g.rename("b", "b2");
    CHECK(g.has("b2"));
    CHECK_FALSE(g.has("b"));
    CHECK(g.children("a") == std::vector<std::string>{"b2"});
}

TEST_CASE("graph JSON round trip") {
    auto g = path_graph(4);
    g.node("u2").insights = {"first", "second"};
    g.node("u3").title = "T";
    auto back = ExplorationGraph::from_json(g.to_json());
    CHECK(back.nodes() == g.nodes());
    CHECK(back.edges() == g.edges());
    CHECK(back.root() == "u0");
    testkit::TempDir dir;
    g.save((dir / "graph.json").string());
    CHECK(ExplorationGraph::load((dir / "graph.json").string()).nodes() == g.nodes());
}

TEST_CASE("stats of a lone root") {
    ExplorationGraph g;
    g.set_root("only");
    auto s = compute_stats(g);
    CHECK(s.node_count == 1);
    CHECK(s.edge_count == 0);
    CHECK(s.max_depth == 0);
    CHECK(s.depth_histogram == std::map<std::int64_t, std::size_t>{{0, 1}});
    CHECK(s.mean_branching == 0.0);
}

TEST_CASE("stats of a five-node path") {
    auto s = compute_stats(path_graph(5));
    CHECK(s.node_count == 5);
    CHECK(s.edge_count == 4);
    CHECK(s.max_depth == 4);
    CHECK(s.depth_histogram == std::map<std::int64_t, std::size_t>{{0, 1}, {1, 1}, {2, 1}, {3, 1}, {4, 1}});
    CHECK(s.mean_branching == doctest::Approx(1.0));
}

TEST_CASE("stats of a star, with trace and citations") {
    ExplorationGraph g;
    g.set_root("hub");
    for (int i = 0; i < 6; ++i) g.add_child("hub", "leaf" + std::to_string(i), i % 2 ? EdgeKind::Search : EdgeKind::Link, i + 1);
    std::vector<nlohmann::json> trace = {{{"action", "explore"}}, {{"action", "backtrack"}}, {{"action", "backtrack"}}};
    auto s = compute_stats(g, trace, {"leaf3", "hub"});
    CHECK(s.mean_branching == doctest::Approx(6.0));
    CHECK(s.max_depth == 1);
    CHECK(s.depth_histogram.at(1) == 6);
    CHECK(s.backtrack_count == 2);
    CHECK(s.search_edge_count == 3);
    CHECK(s.cited_depths == std::vector<std::int64_t>{1, 0});
    CHECK_THROWS_AS(compute_stats(g, {}, {"nowhere"}), Error);
}

TEST_CASE("hop depths follow shortest paths") {
    auto g = path_graph(4);
    g.add_edge({"u0", "u3", EdgeKind::Search, 9});
    auto d = hop_depths(g);
    CHECK(d.at("u3") == 1);
    CHECK(d.at("u2") == 2);
}

TEST_CASE("DOT export of a chain") {
    auto g = path_graph(3);
    auto dot = export_dot(g, {"u2"});
    CHECK(dot.rfind("digraph", 0) == 0);
    auto p = parse_dot(dot);
    CHECK(p.nodes.size() == 3);
    CHECK(p.edges == std::set<std::pair<std::string, std::string>>{{"u0", "u1"}, {"u1", "u2"}});
    CHECK(p.nodes.at("u0").at("color") == "red");
    CHECK(p.nodes.at("u2").at("color") == "cyan");
    CHECK(p.nodes.at("u2").at("cited") == "true");
    CHECK(p.nodes.at("u1").at("color") == depth_color(1, 2));
    CHECK(export_dot(g, {"u2"}) == dot);
}

TEST_CASE("GraphML export round trips node and edge sets") {
    ExplorationGraph g;
    g.set_root("https://r.test/?a=1&b=<2>");
    g.add_child(g.root(), "https://r.test/x\"y", EdgeKind::Link, 1);
    g.add_child(g.root(), "caesar://search/1?q=sails", EdgeKind::Search, 2);
    auto xml = export_graphml(g);
    auto p = parse_graphml(xml);
    CHECK(p.nodes.size() == 3);
    CHECK(p.nodes.count("https://r.test/?a=1&b=<2>") == 1);
    CHECK(p.edges.size() == 2);
    CHECK(p.edges.count({g.root(), "https://r.test/x\"y"}) == 1);
    auto p2 = parse_dot(export_dot(g));
    CHECK(p2.nodes.size() == 3);
    CHECK(p2.edges == p.edges);
    CHECK(export_graph(g, ExportFormat::GraphMl) == xml);
    CHECK(export_format_from_string("dot") == ExportFormat::Dot);
    CHECK_THROWS_AS(export_format_from_string("gexf"), Error);
}

TEST_CASE("depth palette") {
    CHECK(depth_palette().size() == 8);
    CHECK(depth_color(0, 10) == depth_palette().front());
    CHECK(depth_color(10, 10) == depth_palette().back());
    CHECK(depth_color(0, 0) == depth_palette().front());
}

TEST_CASE("embedding TSV round trip") {
    HashEmbedder emb(256);
    std::vector<KnowledgeEntry> entries;
    for (int i = 0; i < 4; ++i) {
        KnowledgeEntry e;
        e.entry_id = "e" + std::to_string(i);
        e.text = "entry text " + std::to_string(i);
        e.embedding = emb.embed(e.text + " sail vane orbit");
        entries.push_back(e);
    }
    auto tsv = embeddings_tsv(entries);
    CHECK(tsv.rfind("id\te0\te1\t", 0) == 0);
    auto rows = read_embeddings_tsv(tsv);
    REQUIRE(rows.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(rows[i].first == entries[i].entry_id);
        REQUIRE(rows[i].second.size() == 256);
        double max_err = 0;
        for (std::size_t k = 0; k < 256; ++k) max_err = std::max(max_err, std::abs(rows[i].second[k] - entries[i].embedding[k]));
        CHECK(max_err <= 1e-9);
    }
}
