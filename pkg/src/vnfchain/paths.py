"""Candidate path enumeration and the path-indexed sets the ILP is built on."""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from .topology import Demand, NodeRoles, Topology

Arc = tuple[int, int]


class PathSetError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Path:
    """Simple node sequence from source to destination (hop metric)."""

    nodes: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.nodes) - 1

    @property
    def arcs(self) -> tuple[Arc, ...]:
        return tuple(zip(self.nodes, self.nodes[1:]))

    def position(self, node: int) -> int:
        return self.nodes.index(node)

    def __contains__(self, node: object) -> bool:
        return node in self.nodes

    def sort_key(self) -> tuple[int, tuple[int, ...]]:
        return (self.length, self.nodes)


def _lex_shortest(
    adj: dict[int, list[int]],
    s: int,
    d: int,
    banned_nodes: set[int],
    banned_arcs: set[Arc],
) -> tuple[int, ...] | None:
    """Lexicographically smallest among the fewest-hop s->d paths, or None."""
    # BFS distances towards d over the reversed restricted graph
    dist = {d: 0}
    queue = deque([d])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w in dist or w in banned_nodes or (w, u) in banned_arcs:
                continue
            dist[w] = dist[u] + 1
            queue.append(w)
    if s not in dist:
        return None
    path = [s]
    u = s
    while u != d:
        u = next(
            w for w in adj[u]
            if dist.get(w) == dist[u] - 1 and (u, w) not in banned_arcs and w not in banned_nodes
        )
        path.append(u)
    return tuple(path)


@lru_cache(maxsize=4096)
def _yen(topology: Topology, s: int, d: int, k: int) -> tuple[Path, ...]:
    adj = topology.adjacency()
    first = _lex_shortest(adj, s, d, set(), set())
    if first is None:
        return ()
    found: list[tuple[int, ...]] = [first]
    heap: list[tuple[int, tuple[int, ...]]] = []
    queued: set[tuple[int, ...]] = set()
    while len(found) < k:
        last = found[-1]
        for i in range(len(last) - 1):
            spur, root = last[i], last[: i + 1]
            banned_arcs = {
                (p[i], p[i + 1]) for p in found if len(p) > i + 1 and p[: i + 1] == root
            }
            banned_nodes = set(root[:-1])
            tail = _lex_shortest(adj, spur, d, banned_nodes, banned_arcs)
            if tail is None:
                continue
            cand = root[:-1] + tail
            if cand not in queued:
                queued.add(cand)
                heapq.heappush(heap, (len(cand), cand))
        while heap and heap[0][1] in found:
            heapq.heappop(heap)
        if not heap:
            break
        found.append(heapq.heappop(heap)[1])
    return tuple(Path(p) for p in found)


def k_shortest_paths(topology: Topology, s: int, d: int, k: int) -> list[Path]:
    """Up to ``k`` loopless fewest-hop paths from ``s`` to ``d`` (Yen).

    Ties are broken by lexicographic node sequence, so the output equals the
    first ``k`` simple paths under the (hops, node sequence) order. A
    disconnected pair yields an empty list.
    """
    if s == d:
        raise ValueError("source and destination must differ")
    if s not in topology.nodes or d not in topology.nodes:
        raise KeyError(f"unknown endpoint in ({s},{d})")
    if k < 1:
        raise ValueError("k must be >= 1")
    return list(_yen(topology, s, d, k))


def chain_pairs(path: Path, roles: NodeRoles) -> tuple[tuple[int, int], ...]:
    """Node pairs (u, v) on ``path`` eligible to host consecutive chain functions.

    ``u`` is NFV-capable and ``v`` is any hosting node at the same or a later
    position; a DC node only pairs with itself.
    """
    nodes = path.nodes
    out: list[tuple[int, int]] = []
    for a, u in enumerate(nodes):
        if u in roles.nfv_nodes:
            out.extend((u, v) for v in nodes[a:] if v in roles.hosting)
        elif u in roles.dc_nodes:
            out.append((u, u))
    return tuple(out)


@dataclass(frozen=True)
class PathSet:
    """Candidate paths per demand plus the link and chain-pair indices."""

    demands: tuple[Demand, ...]
    roles: NodeRoles
    k: int
    paths: tuple[tuple[Path, ...], ...]
    link_index: dict[Arc, tuple[tuple[int, int], ...]]
    pairs: dict[tuple[int, int], tuple[tuple[int, int], ...]]

    def __hash__(self) -> int:
        return hash((self.demands, self.roles, self.k, self.paths))

    def candidates(self, dem: int) -> tuple[Path, ...]:
        return self.paths[dem]


def build_path_set(
    topology: Topology, roles: NodeRoles, demands: Sequence[Demand], k: int
) -> PathSet:
    """Enumerate candidates for every demand and derive the index sets.

    Raises:
        PathSetError: a demand has no candidate path at all.
    """
    paths: list[tuple[Path, ...]] = []
    for dem in demands:
        cands = tuple(k_shortest_paths(topology, dem.source, dem.dest, k))
        if not cands:
            raise PathSetError(f"demand ({dem.source},{dem.dest}) has no candidate path")
        paths.append(cands)

    link_index: dict[Arc, list[tuple[int, int]]] = {arc: [] for arc in topology.arcs}
    pairs: dict[tuple[int, int], tuple[tuple[int, int], ...]] = {}
    for di, cands in enumerate(paths):
        for pi, path in enumerate(cands):
            for arc in path.arcs:
                link_index[arc].append((di, pi))
            pairs[(di, pi)] = chain_pairs(path, roles)
    return PathSet(
        demands=tuple(demands),
        roles=roles,
        k=k,
        paths=tuple(paths),
        link_index={arc: tuple(v) for arc, v in link_index.items()},
        pairs=pairs,
    )

