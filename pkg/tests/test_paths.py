from __future__ import annotations

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vnfchain.paths import Path, PathSetError, build_path_set, k_shortest_paths
from vnfchain.topology import Demand, NodeRoles, Topology


def _topo(n, edges):
    return Topology(tuple(range(1, n + 1)), tuple((a, b, 1.0) for a, b in edges))


def _exhaustive(topo, s, d, k):
    g = nx.Graph()
    g.add_nodes_from(topo.nodes)
    g.add_edges_from((i, j) for i, j, _ in topo.links)
    every = sorted((len(p) - 1, tuple(p)) for p in nx.all_simple_paths(g, s, d))
    return [nodes for _, nodes in every[:k]]


LINE = _topo(3, [(1, 2), (2, 3)])


def test_line_graph_unique_path():
    paths = k_shortest_paths(LINE, 1, 3, 3)
    assert [p.nodes for p in paths] == [(1, 2, 3)]
    assert paths[0].length == 2


def test_four_cycle_lexicographic_ties():
    cyc = _topo(4, [(1, 2), (2, 3), (3, 4), (4, 1)])
    assert [p.nodes for p in k_shortest_paths(cyc, 1, 3, 5)] == [(1, 2, 3), (1, 4, 3)]


def test_nsfnet_two_to_fourteen(nsfnet):
    paths = k_shortest_paths(nsfnet.topology, 2, 14, 3)
    assert len(paths) == 3
    lengths = [p.length for p in paths]
    assert lengths == sorted(lengths)
    assert [p.nodes for p in paths] == _exhaustive(nsfnet.topology, 2, 14, 3)


def test_disconnected_pair_gives_empty_list():
    topo = _topo(4, [(1, 2), (3, 4)])
    assert k_shortest_paths(topo, 1, 4, 3) == []


def test_bad_arguments():
    with pytest.raises(ValueError):
        k_shortest_paths(LINE, 1, 1, 1)
    with pytest.raises(ValueError):
        k_shortest_paths(LINE, 1, 3, 0)


@settings(max_examples=150, deadline=None)
@given(st.data())
def test_yen_equals_exhaustive(data):
    n = data.draw(st.integers(2, 7))
    pairs = [(a, b) for a in range(1, n + 1) for b in range(a + 1, n + 1)]
    edges = data.draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    topo = _topo(n, edges)
    s, d = data.draw(st.sampled_from([(a, b) for a in range(1, n + 1) for b in range(1, n + 1) if a != b]))
    k = data.draw(st.integers(1, 8))
    got = [p.nodes for p in k_shortest_paths(topo, s, d, k)]
    assert got == _exhaustive(topo, s, d, k)
    assert got == [p.nodes for p in k_shortest_paths(topo, s, d, k)]


def test_path_set_pairs_line_nfv_only():
    ps = build_path_set(LINE, NodeRoles(frozenset(), frozenset({2})), [Demand(1, 3, 1.0)], 1)
    assert ps.pairs[(0, 0)] == ((2, 2),)


def test_path_set_pairs_line_with_dc():
    ps = build_path_set(LINE, NodeRoles(frozenset({3}), frozenset({2})), [Demand(1, 3, 1.0)], 1)
    assert set(ps.pairs[(0, 0)]) == {(2, 2), (2, 3), (3, 3)}


def test_link_index_matches_scan(nsfnet):
    ps = build_path_set(nsfnet.topology, nsfnet.roles, nsfnet.demands, 5)
    for arc, members in ps.link_index.items():
        expected = {
            (di, pi)
            for di, cands in enumerate(ps.paths)
            for pi, p in enumerate(cands)
            if arc in p.arcs
        }
        assert set(members) == expected
    for di, cands in enumerate(ps.paths):
        for pi, p in enumerate(cands):
            assert sum((di, pi) in m for m in ps.link_index.values()) == p.length
            assert [c.sort_key() for c in cands] == sorted(c.sort_key() for c in cands)


def test_link_index_arc_two_one(nsfnet):
    ps = build_path_set(nsfnet.topology, nsfnet.roles, nsfnet.demands, 5)
    expected = {
        (di, pi)
        for di, cands in enumerate(ps.paths)
        for pi, p in enumerate(cands)
        if any(a == 2 and b == 1 for a, b in zip(p.nodes, p.nodes[1:]))
    }
    assert set(ps.link_index[(2, 1)]) == expected


def test_pair_index_invariants(nsfnet):
    roles = NodeRoles(frozenset({1}), frozenset({3, 5, 8, 10}))
    ps = build_path_set(nsfnet.topology, roles, nsfnet.demands, 5)
    for (di, pi), pairs in ps.pairs.items():
        path = ps.paths[di][pi]
        for u, v in pairs:
            if u in roles.dc_nodes:
                assert u == v
            else:
                assert u in roles.nfv_nodes and v in roles.hosting
                assert path.position(u) <= path.position(v)
        for u in roles.dc_nodes & set(path.nodes):
            assert (u, u) in pairs


def test_path_set_error_names_demand():
    topo = _topo(4, [(1, 2), (3, 4)])
    with pytest.raises(PathSetError, match=r"\(1,4\)"):
        build_path_set(topo, NodeRoles(), [Demand(1, 4, 1.0)], 2)


def test_path_helpers():
    p = Path((1, 2, 3))
    assert p.arcs == ((1, 2), (2, 3))
    assert p.position(3) == 2 and 2 in p
