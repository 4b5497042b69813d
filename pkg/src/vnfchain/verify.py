"""Independent feasibility check of a decoded placement.

Deliberately does not reuse the compiler: roles, chain order, capacities and
node budgets are re-derived from the scenario and strategy here.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

from .ilp_model import MB, DcNfv, DcNfvAll, DcOnly, NfvAll, PlacementSolution, Strategy
from .topology import Scenario

TOL = 1e-9


@dataclass
class Verdict:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def _hosts(scenario: Scenario, strategy: Strategy) -> tuple[set[int], set[int]]:
    """(dc nodes, capacity-limited nodes) under ``strategy``."""
    nodes = set(scenario.topology.nodes)
    dc = set(scenario.roles.dc_nodes)
    if isinstance(strategy, DcOnly):
        return dc, set()
    if isinstance(strategy, DcNfv):
        return dc, set(strategy.nfv) - dc
    if isinstance(strategy, DcNfvAll):
        return dc, nodes - dc
    if isinstance(strategy, NfvAll):
        return set(), nodes
    if isinstance(strategy, MB):
        return set(), set()
    raise TypeError(f"unknown strategy {strategy!r}")


def verify_solution(scenario: Scenario, strategy: Strategy, solution: PlacementSolution) -> Verdict:
    """Walk every demand's path and re-add loads; returns all violations found."""
    verdict = Verdict()
    bad = verdict.violations
    topo = scenario.topology
    caps = {}
    for i, j, c in topo.links:
        caps[(i, j)] = c
        caps[(j, i)] = c
    chain = list(scenario.chain.functions)
    vnfs = {v.name: v for v in scenario.catalog}
    dc, limited = _hosts(scenario, strategy)
    mb_at = {f: n for n, fs in strategy.placements for f in fs} if isinstance(strategy, MB) else {}

    if len(solution.paths) != len(scenario.demands):
        bad.append("solution does not cover every demand")
        return verdict

    arc_load: dict[tuple[int, int], float] = defaultdict(float)
    cores: dict[int, float] = defaultdict(float)
    memory: dict[int, float] = defaultdict(float)

    for dem, path, placed in zip(scenario.demands, solution.paths, solution.placements):
        tag = f"demand ({dem.source},{dem.dest})"
        seq = list(path.nodes)
        if seq[0] != dem.source or seq[-1] != dem.dest:
            bad.append(f"path endpoints, {tag}")
        if len(set(seq)) != len(seq):
            bad.append(f"path not simple, {tag}")
        for a, b in zip(seq, seq[1:]):
            if (a, b) not in caps:
                bad.append(f"path uses missing link ({a},{b}), {tag}")
            arc_load[(a, b)] += dem.flow

        where: dict[str, list[int]] = defaultdict(list)
        for f, v in placed:
            where[f].append(v)
        missing = [f for f in chain if not where[f]]
        if missing:
            bad.append(f"functions {missing} not placed, {tag}")
            continue
        if any(len(where[f]) > 1 for f in chain):
            bad.append(f"function placed more than once, {tag}")
            continue
        nodes = [where[f][0] for f in chain]
        if any(v not in seq for v in nodes):
            bad.append(f"function off the chosen path, {tag}")
            continue
        positions = [seq.index(v) for v in nodes]
        if positions != sorted(positions):
            bad.append(f"chain order, {tag}")
        for f, v in zip(chain, nodes):
            if isinstance(strategy, MB):
                if mb_at.get(f) != v:
                    bad.append(f"function {f} not at its middle-box, {tag}")
            elif v not in dc and v not in limited:
                bad.append(f"function {f} at non-hosting node {v}, {tag}")
        # once the chain enters a DC it completes there
        for k in range(len(chain) - 1):
            if nodes[k] in dc and nodes[k + 1] != nodes[k]:
                bad.append(f"chain leaves DC {nodes[k]}, {tag}")
                break
        for f, v in zip(chain, nodes):
            if v in limited:
                spec = vnfs[f]
                cores[v] += dem.flow * spec.cores_per_gbps
                if scenario.budget.memory_mode == "non_scaling":
                    memory[v] += spec.install_mem
                elif scenario.budget.memory_mode == "scaling":
                    memory[v] += dem.flow * spec.mem_per_gbps

    for arc in sorted(arc_load):
        if arc in caps and arc_load[arc] > caps[arc] + TOL:
            bad.append(f"capacity ({arc[0]},{arc[1]}): {arc_load[arc]:g} > {caps[arc]:g}")
    theta = scenario.budget.cores_per_nfv_node
    if not isinstance(strategy, MB) and not math.isinf(theta):
        for v in sorted(cores):
            if cores[v] > theta + TOL:
                bad.append(f"cores at node {v}: {cores[v]:g} > {theta:g}")
    ups = scenario.budget.mem_per_nfv_node
    if not isinstance(strategy, MB) and not math.isinf(ups):
        for v in sorted(memory):
            if memory[v] > ups + TOL:
                bad.append(f"memory at node {v}: {memory[v]:g} > {ups:g}")

    phi = sum(p.length * d.flow for p, d in zip(solution.paths, scenario.demands))
    if abs(phi - solution.objective) > 1e-6:
        bad.append(f"objective mismatch: {solution.objective:g} vs recomputed {phi:g}")
    return verdict
