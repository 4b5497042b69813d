"""Seeded small random instances for oracle cross-checks and the CLI ``--seed`` flag."""

from __future__ import annotations

import random
from dataclasses import dataclass

from .ilp_model import MB, DcNfv, DcNfvAll, DcOnly, NfvAll, Strategy
from .topology import (
    Demand,
    NodeRoles,
    ResourceBudget,
    Scenario,
    ServiceChain,
    Topology,
    VnfSpec,
)

FUNCTION_NAMES = ("A", "B", "C", "D", "E")


@dataclass(frozen=True)
class Instance:
    seed: int
    scenario: Scenario
    strategy: Strategy
    k: int


def _connected_links(rng: random.Random, n: int, extra: int) -> list[tuple[int, int]]:
    nodes = list(range(1, n + 1))
    links = set()
    for v in nodes[1:]:
        u = rng.randrange(1, v)
        links.add((u, v))
    pool = [(a, b) for a in nodes for b in nodes if a < b and (a, b) not in links]
    rng.shuffle(pool)
    links.update(pool[:extra])
    return sorted(links)


def random_instance(
    seed: int,
    *,
    max_nodes: int = 6,
    max_demands: int = 3,
    max_chain: int = 3,
    max_k: int = 3,
    thetas: tuple[float, ...] = (1, 2, 4),
) -> Instance:
    """Deterministic small instance; every strategy family and memory mode appears."""
    rng = random.Random(seed)
    n = rng.randint(3, max_nodes)
    links = _connected_links(rng, n, rng.randint(0, n))
    topo = Topology(
        tuple(range(1, n + 1)),
        tuple((a, b, float(rng.choice((2, 3, 4, 6)))) for a, b in links),
    )
    chain = FUNCTION_NAMES[: rng.randint(1, max_chain)]
    catalog = tuple(
        VnfSpec(f, rng.choice((0.25, 0.5, 1.0, 1.5)), rng.choice((1.0, 2.0)), rng.choice((0.5, 1.0)))
        for f in chain
    )
    pairs = [(a, b) for a in topo.nodes for b in topo.nodes if a != b]
    rng.shuffle(pairs)
    demands = tuple(
        Demand(s, d, rng.choice((0.5, 1.0, 1.5, 2.0, 3.0)))
        for s, d in pairs[: rng.randint(1, max_demands)]
    )
    dc = rng.choice(topo.nodes)
    others = [v for v in topo.nodes if v != dc]
    nfv = frozenset(rng.sample(others, rng.randint(0, len(others))))
    mode = rng.choice(("off", "off", "non_scaling", "scaling"))
    budget = ResourceBudget(
        cores_per_nfv_node=float(rng.choice(thetas)),
        mem_per_nfv_node=float(rng.choice((2, 4, 8))) if mode != "off" else float("inf"),
        memory_mode=mode,
    )
    scenario = Scenario(topo, NodeRoles(frozenset({dc}), nfv), demands, catalog, ServiceChain(chain), budget)
    kind = rng.choice(("mb", "dc-only", "dc-nfv", "dc-nfv-all", "nfv-all"))
    strategy: Strategy
    if kind == "mb":
        # contiguous chain segments on distinct random nodes
        cuts = sorted(rng.sample(range(1, len(chain)), rng.randint(0, len(chain) - 1))) if len(chain) > 1 else []
        bounds = [0, *cuts, len(chain)]
        hosts = rng.sample(list(topo.nodes), len(bounds) - 1)
        strategy = MB.of({h: chain[a:b] for h, a, b in zip(hosts, bounds, bounds[1:])})
    elif kind == "dc-only":
        strategy = DcOnly()
    elif kind == "dc-nfv":
        strategy = DcNfv(nfv)
    elif kind == "dc-nfv-all":
        strategy = DcNfvAll()
    else:
        strategy = NfvAll()
    return Instance(seed, scenario, strategy, rng.randint(1, max_k))
