#!/usr/bin/env python3
"""Validate DOT and GraphML exports of a run with pydot and networkx.

Usage: check_graph_export.py GRAPH_JSON DOT_FILE GRAPHML_FILE [CITATIONS_JSON]
Exits 0 and prints "ok" when both files parse and match graph.json.
"""
import json
import sys

import networkx as nx
import pydot


def unquote(v):
    if v is None:
        return None
    v = str(v)
    if len(v) >= 2 and v[0] == '"' and v[-1] == '"':
        v = v[1:-1].replace('\\"', '"').replace("\\\\", "\\")
    return v


def fail(msg):
    print("FAIL: " + msg)
    sys.exit(1)


def main(argv):
    if len(argv) < 4:
        print(__doc__)
        return 2
    graph = json.load(open(argv[1], encoding="utf-8"))
    cited = set()
    if len(argv) > 4:
        cited = set(json.load(open(argv[4], encoding="utf-8")).get("cited_urls", []))
    want_nodes = {n["url"] for n in graph["nodes"]}
    want_edges = {(e["from"], e["to"]) for e in graph["edges"]}
    root = graph["root"]

    parsed = pydot.graph_from_dot_file(argv[2])
    if not parsed:
        fail("pydot could not parse " + argv[2])
    dot = parsed[0]
    by_id = {}
    colors = {}
    for node in dot.get_nodes():
        name = node.get_name()
        if name in ("node", "edge", "graph"):
            continue
        url = unquote(node.get("url"))
        by_id[name] = url
        colors[url] = unquote(node.get("color"))
    dot_nodes = set(by_id.values())
    dot_edges = {(by_id[e.get_source()], by_id[e.get_destination()]) for e in dot.get_edges()}
    if dot_nodes != want_nodes:
        fail("DOT node set differs: %d vs %d" % (len(dot_nodes), len(want_nodes)))
    if dot_edges != want_edges:
        fail("DOT edge set differs")
    if colors.get(root) != "red":
        fail("DOT root color is %r" % colors.get(root))
    for url in cited:
        if url != root and colors.get(url) != "cyan":
            fail("DOT cited node %s has color %r" % (url, colors.get(url)))

    g = nx.read_graphml(argv[3])
    urls = {n: d.get("url") for n, d in g.nodes(data=True)}
    gm_nodes = set(urls.values())
    gm_edges = {(urls[a], urls[b]) for a, b in g.edges()}
    if gm_nodes != want_nodes:
        fail("GraphML node set differs")
    if gm_edges != want_edges:
        fail("GraphML edge set differs")
    gcolors = {d.get("url"): d.get("color") for _, d in g.nodes(data=True)}
    if gcolors.get(root) != "red":
        fail("GraphML root color is %r" % gcolors.get(root))
    for url in cited:
        if url != root and gcolors.get(url) != "cyan":
            fail("GraphML cited node %s has color %r" % (url, gcolors.get(url)))
    print("ok %d nodes %d edges %d cited" % (len(want_nodes), len(want_edges), len(cited)))
    return 0


if __name__ == "__main__":
    sys.exit(main(sys.argv))
