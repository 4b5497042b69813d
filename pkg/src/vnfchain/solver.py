"""Exact optimisation of a compiled model, and an exhaustive oracle.

``solve`` is a two-level branch-and-bound. The outer level fixes one candidate
path per demand, in descending flow order. The inner level places the chain
on the fixed paths by depth-first search over monotone placements, pruning
with the per-node residual cores and memory.

The inner level does not need the full l/q/j space. When paths are fixed, a
placement is feasible for the rows exactly when each function sits once on
the path, positions never decrease, and a DC, once entered, hosts the rest of
the chain. Any other feasible pattern contains one of these and uses no less
of any node. A path that crosses a DC therefore costs no node resources. The
chosen assignment is expanded into every variable and checked against every
row before it is accepted.

``brute_force`` shares none of this. It enumerates path vectors and raw 0-1
placement patterns and evaluates the rows directly.
"""

from __future__ import annotations

import itertools
import math
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ilp_model import MB, IlpModel, PlacementSolution, decode_values
from .paths import Path

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
TIMEOUT = "timeout"
STATUSES = (OPTIMAL, INFEASIBLE, TIMEOUT)
BRANCH_ORDERS = ("flow-desc", "input")

EPS = 1e-9


class SolverError(RuntimeError):
    """Internal inconsistency between the search and the model rows."""


class GuardError(ValueError):
    """Instance too large for exhaustive enumeration."""


@dataclass(frozen=True)
class SolverConfig:
    time_limit: Optional[float] = None
    node_limit: Optional[int] = None
    tolerance: float = 1e-6
    branch_order: str = "flow-desc"
    # only solutions with objective <= cutoff are sought; "infeasible" then means none exists below it
    cutoff: Optional[float] = None

    def __post_init__(self) -> None:
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time_limit must be >= 0")
        if self.node_limit is not None and self.node_limit < 0:
            raise ValueError("node_limit must be >= 0")
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")
        if self.branch_order not in BRANCH_ORDERS:
            raise ValueError(f"branch_order must be one of {BRANCH_ORDERS}")


@dataclass
class SolveStats:
    nodes: int = 0
    placement_calls: int = 0
    wall_time: float = 0.0


@dataclass
class SolveResult:
    status: str
    objective: Optional[float] = None
    solution: Optional[PlacementSolution] = None
    assignment: Optional[tuple[int, ...]] = None
    path_indices: Optional[tuple[int, ...]] = None
    stats: SolveStats = field(default_factory=SolveStats)

    @property
    def feasible(self) -> bool:
        return self.solution is not None


# --------------------------------------------------------------------------
# shared helpers (result assembly only)

def _assignment(model: IlpModel, chosen: list[int], placements: list[tuple[tuple[str, int], ...]]) -> list[int]:
    values = [0] * len(model.variables)
    idx = model.index
    on: set[tuple] = set()
    for di, dem in enumerate(model.scenario.demands):
        s, d = dem.pair
        pi = chosen[di]
        values[idx[("r", s, d, pi)]] = 1
        for f, v in placements[di]:
            values[idx[("l", f, v, s, d)]] = 1
            values[idx[("q", f, v, pi, s, d)]] = 1
            on.add((f, v, pi, s, d))
    for i, key in enumerate(model.variables):
        if key[0] == "j":
            _, f1, f2, u, v, pi, s, d = key
            if (f1, u, pi, s, d) in on and (f2, v, pi, s, d) in on:
                values[i] = 1
    return values


def _finish(model: IlpModel, values: list[int], chosen: list[int], stats: SolveStats, status: str) -> SolveResult:
    try:
        sol = decode_values(model, values)
    except ValueError as exc:
        raise SolverError(f"search produced an assignment the model rejects: {exc}") from exc
    return SolveResult(status, sol.objective, sol, tuple(values), tuple(chosen), stats)


# --------------------------------------------------------------------------
# branch-and-bound

class _Timeout(Exception):
    pass


@dataclass
class _Cand:
    """One admissible candidate path of a demand, with its placement options."""

    demand: int
    index: int
    cost: float
    arcs: tuple[int, ...]
    free: Optional[tuple[tuple[str, int], ...]]  # placement needing no node resources
    cores: Optional[np.ndarray] = None  # options x NFV nodes
    memory: Optional[np.ndarray] = None
    placements: list[tuple[tuple[str, int], ...]] = field(default_factory=list)
    cols: frozenset[int] = frozenset()  # NFV node columns the options may use


class _Search:
    def __init__(self, model: IlpModel, config: SolverConfig):
        self.model = model
        self.config = config
        self.tol = config.tolerance
        sc = model.scenario
        self.roles = model.roles
        self.chain = sc.chain.functions
        self.stats = SolveStats()
        self.start = time.perf_counter()
        is_mb = isinstance(model.strategy, MB)
        budget = sc.budget
        self.theta = math.inf if is_mb else budget.cores_per_nfv_node
        self.ups = math.inf if is_mb or budget.memory_mode == "off" else budget.mem_per_nfv_node
        self.mem_mode = budget.memory_mode
        self.limited = not (math.isinf(self.theta) and math.isinf(self.ups))

        arcs = sorted(sc.topology.arcs)
        self.arc_id = {a: i for i, a in enumerate(arcs)}
        self.arc_cap = [sc.topology.arcs[a] for a in arcs]
        self.nf = sorted(self.roles.nfv_nodes)
        self.col = {v: i for i, v in enumerate(self.nf)}
        self.cap_c = np.full(len(self.nf), self.theta, dtype=float)
        self.cap_m = np.full(len(self.nf), self.ups, dtype=float)
        vnfs = sc.vnfs
        self.n_core = np.array([vnfs[f].cores_per_gbps for f in self.chain], dtype=float)
        if self.mem_mode == "non_scaling":
            self.n_mem = np.array([vnfs[f].install_mem for f in self.chain], dtype=float)
        elif self.mem_mode == "scaling":
            self.n_mem = np.array([vnfs[f].mem_per_gbps for f in self.chain], dtype=float)
        else:
            self.n_mem = np.zeros(len(self.chain))
        self.mb_loc = model.strategy.location() if is_mb else None

        self.demands = sc.demands
        n = len(self.demands)
        flows = [d.flow for d in self.demands]
        self.req_c = [f * float(self.n_core.sum()) for f in flows]
        self.req_m = [
            float(self.n_mem.sum()) * (1.0 if self.mem_mode == "non_scaling" else f) for f in flows
        ]
        self.cands = [self._candidates(di) for di in range(n)]
        if config.branch_order == "flow-desc":
            self.order = sorted(range(n), key=lambda i: -flows[i])
        else:
            self.order = list(range(n))

        self.best_obj: Optional[float] = None
        self.best_vec: Optional[tuple[int, ...]] = None
        self.best_place: Optional[list] = None
        self.nogoods: dict[tuple[int, int], list[frozenset]] = {}
        self.placed: dict[frozenset, Optional[list[int]]] = {}

    # --- preprocessing

    def _candidates(self, di: int) -> list[_Cand]:
        dem = self.demands[di]
        out = []
        for pi, path in enumerate(self.model.path_set.paths[di]):
            if any(dem.flow > self.arc_cap[self.arc_id[a]] + EPS for a in path.arcs):
                continue
            base = dict(demand=di, index=pi, cost=path.length * dem.flow,
                        arcs=tuple(self.arc_id[a] for a in path.arcs))
            if self.mb_loc is not None:
                pos = [path.position(self.mb_loc[f]) if self.mb_loc[f] in path else -1 for f in self.chain]
                if min(pos) >= 0 and pos == sorted(pos):
                    out.append(_Cand(free=tuple((f, self.mb_loc[f]) for f in self.chain), **base))
                continue
            dc = [v for v in path.nodes if v in self.roles.dc_nodes]
            if dc:
                out.append(_Cand(free=tuple((f, dc[0]) for f in self.chain), **base))
                continue
            hosts = [v for v in path.nodes if v in self.roles.nfv_nodes]
            if not hosts:
                continue
            if not self.limited:
                out.append(_Cand(free=tuple((f, hosts[0]) for f in self.chain), **base))
                continue
            cand = self._options(_Cand(free=None, **base), dem.flow, hosts)
            if cand is not None:
                out.append(cand)
        return out

    def _options(self, cand: _Cand, flow: float, hosts: list[int]) -> Optional[_Cand]:
        """Attach every distinct monotone placement over ``hosts`` that fits empty nodes."""
        n, width = len(self.chain), len(self.nf)
        combos = np.array(list(itertools.combinations_with_replacement(range(len(hosts)), n)))
        cols = np.array([self.col[h] for h in hosts])[combos]  # options x functions
        cores = np.zeros((len(combos), width))
        mem = np.zeros((len(combos), width))
        rows = np.arange(len(combos))
        for k in range(n):
            np.add.at(cores, (rows, cols[:, k]), flow * self.n_core[k])
            np.add.at(mem, (rows, cols[:, k]), self.n_mem[k] * (flow if self.mem_mode == "scaling" else 1.0))
        ok = np.all(cores <= self.cap_c + EPS, axis=1) & np.all(mem <= self.cap_m + EPS, axis=1)
        if not ok.any():
            return None
        cores, mem, combos = cores[ok], mem[ok], combos[ok]
        _, first = np.unique(np.round(np.hstack([cores, mem]), 9), axis=0, return_index=True)
        first.sort()
        cores, mem, combos = cores[first], mem[first], combos[first]
        # spread load first: smallest peak share of a node, then fewest nodes
        with np.errstate(divide="ignore", invalid="ignore"):
            share = np.maximum(
                np.nan_to_num(cores / self.cap_c, posinf=0.0),
                np.nan_to_num(mem / self.cap_m, posinf=0.0),
            )
        peak = np.round(share.max(axis=1), 9)
        used = (cores + mem > 0).sum(axis=1)
        order = np.lexsort((np.arange(len(combos)), used, peak))
        cand.cores, cand.memory = cores[order], mem[order]
        cand.placements = [tuple((f, hosts[h]) for f, h in zip(self.chain, combos[o])) for o in order]
        cand.cols = frozenset(self.col[h] for h in hosts)
        return cand

    # --- limits

    def _tick(self) -> None:
        self.stats.nodes += 1
        cfg = self.config
        if cfg.node_limit is not None and self.stats.nodes > cfg.node_limit:
            raise _Timeout
        if cfg.time_limit is not None and (self.stats.nodes & 63) == 0:
            if time.perf_counter() - self.start > cfg.time_limit:
                raise _Timeout

    # --- placement subproblem

    def _place(self, jobs: list[_Cand]) -> Optional[list[int]]:
        """Exact DFS choosing one option per job on empty nodes; None if impossible."""
        self.stats.placement_calls += 1
        res_c, res_m = self.cap_c.copy(), self.cap_m.copy()
        failed: set = set()

        def rec(rem: frozenset) -> Optional[dict[int, int]]:
            if not rem:
                return {}
            key = (rem, np.round(res_c, 9).tobytes(), np.round(res_m, 9).tobytes())
            if key in failed:
                return None
            self._tick()
            best = None
            for j in sorted(rem):
                cj = jobs[j]
                fit = np.flatnonzero(
                    np.all(cj.cores <= res_c + EPS, axis=1) & np.all(cj.memory <= res_m + EPS, axis=1)
                )
                if fit.size == 0:
                    failed.add(key)
                    return None
                if best is None or fit.size < best[1].size:
                    best = (j, fit)
            if len(rem) > 1 and not self._transport_ok([jobs[j] for j in rem], res_c, res_m):
                failed.add(key)
                return None
            j, fit = best
            cj = jobs[j]
            for o in fit:
                np.subtract(res_c, cj.cores[o], out=res_c)
                np.subtract(res_m, cj.memory[o], out=res_m)
                got = rec(rem - {j})
                np.add(res_c, cj.cores[o], out=res_c)
                np.add(res_m, cj.memory[o], out=res_m)
                if got is not None:
                    got[j] = int(o)
                    return got
            failed.add(key)
            return None

        got = rec(frozenset(range(len(jobs))))
        return None if got is None else [got[j] for j in range(len(jobs))]

    def _transport_ok(self, jobs: list[_Cand], res_c: np.ndarray, res_m: np.ndarray) -> bool:
        """Fractional relaxation: each demand's total spread over its own nodes."""
        for need, res, cap in ((self.req_c, res_c, self.theta), (self.req_m, res_m, self.ups)):
            if math.isinf(cap):
                continue
            items = [(need[c.demand], c.cols) for c in jobs if need[c.demand] > EPS]
            if not items:
                continue
            used = sorted(set().union(*(cols for _, cols in items)))
            if sum(a for a, _ in items) > float(res[used].sum()) + EPS:
                return False
            if len(items) > 1 and not _max_flow_saturates(items, {v: float(res[v]) for v in used}):
                return False
        return True

    # --- outer search

    def run(self) -> None:
        n = len(self.demands)
        self.chosen: list[Optional[int]] = [None] * n
        self.arc_res = list(self.arc_cap)
        if any(not c for c in self.cands):
            return
        self._dfs(0, 0.0, {}, {})

    def _fitting(self, di: int) -> list[_Cand]:
        flow = self.demands[di].flow
        ar = self.arc_res
        return [c for c in self.cands[di] if all(ar[a] >= flow - EPS for a in c.arcs)]

    def _dfs(self, k: int, cost: float, jobs: dict[int, _Cand], witness: dict[int, int]) -> None:
        """``jobs``: committed resource-using candidates; ``witness``: an option for each."""
        self._tick()
        if k == len(self.demands):
            self._record(cost, jobs, witness)
            return
        di = self.order[k]
        flow = self.demands[di].flow
        for cand in self._fitting(di):
            for a in cand.arcs:
                self.arc_res[a] -= flow
            self.chosen[di] = cand.index
            try:
                self._branch(k, cand, cost + cand.cost, jobs, witness)
            finally:
                for a in cand.arcs:
                    self.arc_res[a] += flow
                self.chosen[di] = None

    def _bound(self, k: int, cost: float, jobs: dict[int, _Cand]) -> Optional[tuple[float, tuple[int, ...], list[_Cand]]]:
        """Lower bound, least reachable path vector and still-undecided resource demands."""
        lb = cost
        lex = list(self.chosen)
        pending: list[_Cand] = []
        shed: list[tuple[float, float]] = []  # (extra cost to avoid node resources, cores)
        cores_left = self.theta * len(self.nf) - sum(self.req_c[d] for d in jobs)
        for e in self.order[k + 1:]:
            fit = self._fitting(e)
            if not fit:
                return None
            c_free = min((c.cost for c in fit if c.free is not None), default=math.inf)
            c_res = min((c.cost for c in fit if c.free is None), default=math.inf)
            lb += min(c_free, c_res)
            lex[e] = min(c.index for c in fit)
            if c_res < c_free:
                shed.append((c_free - c_res, self.req_c[e]))
                if math.isinf(c_free):
                    res = [c for c in fit if c.free is None]
                    merged = _Cand(e, -1, 0.0, (), None, cols=frozenset().union(*(c.cols for c in res)))
                    pending.append(merged)
        if not math.isinf(self.theta):
            # aggregate cores: demands on their cheap path must fit, or pay to detour
            excess = sum(r for _, r in shed) - cores_left
            if excess > EPS:
                for extra, r in sorted(shed, key=lambda t: t[0] / t[1] if t[1] > 0 else math.inf):
                    if math.isinf(extra):
                        return None
                    take = min(r, excess)
                    lb += extra * take / r
                    excess -= take
                    if excess <= EPS:
                        break
                if excess > EPS:
                    return None
        return lb, tuple(lex), pending

    def _branch(self, k: int, cand: _Cand, cost: float, jobs: dict[int, _Cand], witness: dict[int, int]) -> None:
        di = cand.demand
        if cand.free is None:
            jobs = {**jobs, di: cand}
            # known infeasible combinations
            mine = (di, cand.index)
            for ng in self.nogoods.get(mine, ()):
                if all(d in jobs and jobs[d].index == p for d, p in ng):
                    return
        bound = self._bound(k, cost, jobs)
        if bound is None:
            return
        lb, lex, pending = bound
        if self.config.cutoff is not None and lb > self.config.cutoff + self.tol:
            return
        if self.best_obj is not None:
            if lb > self.best_obj + self.tol:
                return
            if lb >= self.best_obj - self.tol and lex >= self.best_vec:
                return
        if cand.free is not None:
            self._dfs(k + 1, cost, jobs, witness)
            return
        witness = self._extend(cand, jobs, witness)
        if witness is None:
            return
        if pending and not self._transport_ok(list(jobs.values()) + pending, self.cap_c, self.cap_m):
            return
        self._dfs(k + 1, cost, jobs, witness)

    def _extend(self, cand: _Cand, jobs: dict[int, _Cand], witness: dict[int, int]) -> Optional[dict[int, int]]:
        """Witness placement for ``jobs`` (which now include ``cand``), or None."""
        res_c, res_m = self.cap_c.copy(), self.cap_m.copy()
        for d, o in witness.items():
            res_c -= jobs[d].cores[o]
            res_m -= jobs[d].memory[o]
        fit = np.flatnonzero(
            np.all(cand.cores <= res_c + EPS, axis=1) & np.all(cand.memory <= res_m + EPS, axis=1)
        )
        if fit.size:
            return {**witness, cand.demand: int(fit[0])}
        # re-solve only the demands linked to this one through shared nodes
        group = {cand.demand}
        cols = set(cand.cols)
        grew = True
        while grew:
            grew = False
            for d, c in jobs.items():
                if d not in group and cols & c.cols:
                    group.add(d)
                    cols |= c.cols
                    grew = True
        members = sorted(group)
        got = self._place_cached([jobs[d] for d in members])
        if got is None:
            self._learn([jobs[d] for d in members], cand)
            return None
        out = {d: o for d, o in witness.items() if d not in group}
        out.update(zip(members, got))
        return out

    def _place_cached(self, jobs: list[_Cand]) -> Optional[list[int]]:
        key = frozenset((c.demand, c.index) for c in jobs)
        if key not in self.placed:
            self.placed[key] = self._place(jobs)
        return self.placed[key]

    def _learn(self, jobs: list[_Cand], cand: _Cand) -> None:
        """Shrink an infeasible group to a minimal infeasible subset and store it."""
        core = list(jobs)
        # ``cand`` belongs to every infeasible subset: the group without it was placed
        for c in sorted(jobs, key=lambda c: (len(c.cols & cand.cols), c.demand)):
            if c is cand:
                continue
            trial = [x for x in core if x is not c]
            if self._place_cached(trial) is None:
                core = trial
        ng = frozenset((c.demand, c.index) for c in core)
        for item in ng:
            self.nogoods.setdefault(item, []).append(ng)

    def _record(self, cost: float, jobs: dict[int, _Cand], witness: dict[int, int]) -> None:
        vec = tuple(self.chosen)  # type: ignore[arg-type]
        if self.config.cutoff is not None and cost > self.config.cutoff + self.tol:
            return
        if self.best_obj is not None:
            if cost > self.best_obj + self.tol:
                return
            if cost >= self.best_obj - self.tol and vec >= self.best_vec:
                return
        self.best_obj = cost
        self.best_vec = vec
        place: list = []
        for di, pi in enumerate(vec):
            if di in jobs:
                place.append(jobs[di].placements[witness[di]])
            else:
                place.append(next(c.free for c in self.cands[di] if c.index == pi))
        self.best_place = place


def _max_flow_saturates(items: list[tuple[float, frozenset[int]]], cap: dict[int, float]) -> bool:
    """Can every item's amount be routed to capacities of the nodes it may use?"""
    need = [a for a, _ in items]
    left = dict(cap)
    # flow[i][v]: amount of item i placed on node v
    flow: list[dict[int, float]] = [dict() for _ in items]
    for i in range(len(items)):
        while need[i] > 1e-9:
            # BFS over items/nodes for an augmenting path from item i to a node with spare capacity
            prev: dict = {("i", i): None}
            dq = deque([("i", i)])
            end = None
            while dq and end is None:
                kind, x = dq.popleft()
                if kind == "i":
                    for v in items[x][1]:
                        if ("v", v) not in prev:
                            prev[("v", v)] = (kind, x)
                            if left[v] > 1e-9:
                                end = ("v", v)
                                break
                            dq.append(("v", v))
                else:
                    for j, fl in enumerate(flow):
                        if fl.get(x, 0.0) > 1e-9 and ("i", j) not in prev:
                            prev[("i", j)] = (kind, x)
                            dq.append(("i", j))
            if end is None:
                return False
            # bottleneck along the path
            push = min(need[i], left[end[1]])
            node = end
            while prev[node] is not None:
                p = prev[node]
                if node[0] == "i":
                    push = min(push, flow[node[1]].get(p[1], 0.0))
                node = p
            node = end
            while prev[node] is not None:
                p = prev[node]
                if node[0] == "v":
                    flow[p[1]][node[1]] = flow[p[1]].get(node[1], 0.0) + push
                else:
                    flow[node[1]][p[1]] -= push
                node = p
            left[end[1]] -= push
            need[i] -= push
    return True


def solve(model: IlpModel, config: SolverConfig | None = None) -> SolveResult:
    """Exact minimum of the model objective, or a proof of infeasibility.

    Among optima within ``config.tolerance`` the lexicographically smallest
    vector of chosen path indices (demand input order) is returned. When a
    limit is hit the best incumbent so far is returned with status timeout.
    With ``config.cutoff`` set, only solutions at or below the cutoff count,
    so infeasible then means none exists below it.
    """
    config = config or SolverConfig()
    search = _Search(model, config)
    status = OPTIMAL
    try:
        search.run()
    except _Timeout:
        status = TIMEOUT
    search.stats.wall_time = time.perf_counter() - search.start
    if search.best_vec is None:
        return SolveResult(INFEASIBLE if status == OPTIMAL else TIMEOUT, stats=search.stats)
    chosen = list(search.best_vec)
    values = _assignment(model, chosen, search.best_place)
    return _finish(model, values, chosen, search.stats, status)


# --------------------------------------------------------------------------
# exhaustive oracle

def _demand_of(key: tuple) -> tuple[int, int]:
    if key[0] == "r":
        return key[1], key[2]
    return key[-2], key[-1]


def brute_force(
    model: IlpModel,
    *,
    max_vars: int = 30,
    max_path_space: int = 10**6,
    max_block_bits: int = 20,
) -> SolveResult:
    """Exhaustive reference solver for small models.

    Every path vector is enumerated. Per demand and chosen path, every 0-1
    pattern of that demand's placement variables is evaluated against the
    demand's own rows, with the product variables set to the conjunction the
    linking rows demand. Patterns are reduced to their minimal contributions
    to rows shared between demands, then combined exhaustively.

    Raises:
        GuardError: the instance exceeds the enumeration guards.
    """
    start = time.perf_counter()
    stats = SolveStats()
    sc = model.scenario
    cand_counts = [len(c) for c in model.path_set.paths]
    space = math.prod(cand_counts) if cand_counts else 1
    if len(model.variables) > max_vars and space > max_path_space:
        raise GuardError(
            f"{len(model.variables)} variables and {space} path vectors exceed the guard"
        )
    nv = len(model.variables)
    owner = [_demand_of(k) for k in model.variables]
    pairs = [d.pair for d in sc.demands]

    # classify rows
    local: dict[tuple[int, int], list] = {p: [] for p in pairs}
    shared = []
    for c in model.constraints:
        ds = {owner[i] for i, _ in c.terms}
        if not ds:
            if not c.satisfied([0] * nv):
                stats.wall_time = time.perf_counter() - start
                return SolveResult(INFEASIBLE, stats=stats)
            continue
        if len(ds) == 1:
            local[ds.pop()].append(c)
        else:
            shared.append(c)
    monotone = all(c.sense == "<=" and all(w >= 0 for _, w in c.terms) for c in shared)

    # per (demand, path): list of (contribution vector, values on the demand's vars)
    blocks: list[list[list[tuple[np.ndarray, dict[int, int]]]]] = []
    for di, dem in enumerate(sc.demands):
        s, d = dem.pair
        mine = [i for i in range(nv) if owner[i] == (s, d)]
        rows_d = local[(s, d)]
        per_path = []
        for pi in range(cand_counts[di]):
            per_path.append(_block_patterns(model, mine, rows_d, shared, s, d, pi, monotone, max_block_bits, stats))
        blocks.append(per_path)

    best: Optional[tuple[float, tuple[int, ...], list]] = None
    obj = dict(model.objective)
    r_idx = [[model.index[("r", dm.source, dm.dest, pi)] for pi in range(cand_counts[di])]
             for di, dm in enumerate(sc.demands)]
    rhs = np.array([c.rhs for c in shared], dtype=float)
    for vec in itertools.product(*(range(k) for k in cand_counts)):
        stats.nodes += 1
        lists = [blocks[di][pi] for di, pi in enumerate(vec)]
        if any(not lst for lst in lists):
            continue
        value = sum(obj.get(r_idx[di][pi], 0.0) for di, pi in enumerate(vec))
        for combo in itertools.product(*lists):
            total = np.zeros(len(shared))
            for contrib, _ in combo:
                total = total + contrib
            ok = all(
                _cmp(total[k], c.sense, rhs[k]) for k, c in enumerate(shared)
            )
            if ok:
                if best is None or value < best[0] - 1e-9 or (abs(value - best[0]) <= 1e-9 and vec < best[1]):
                    best = (value, vec, [vals for _, vals in combo])
                break
    stats.wall_time = time.perf_counter() - start
    if best is None:
        return SolveResult(INFEASIBLE, stats=stats)
    values = [0] * nv
    for part in best[2]:
        for i, v in part.items():
            values[i] = v
    sol = decode_values(model, values)
    return SolveResult(OPTIMAL, sol.objective, sol, tuple(values), tuple(best[1]), stats)


def _cmp(lhs: float, sense: str, rhs: float) -> bool:
    if sense == "<=":
        return lhs <= rhs + 1e-9
    if sense == ">=":
        return lhs >= rhs - 1e-9
    return abs(lhs - rhs) <= 1e-9


def _block_patterns(model, mine, rows_d, shared, s, d, pi, monotone, max_bits, stats):
    """Feasible local patterns of one demand routed on candidate ``pi``."""
    keys = model.variables
    index = model.index
    fixed: dict[int, int] = {}
    for i in mine:
        if keys[i][0] == "r":
            fixed[i] = int(keys[i][3] == pi)
    l_vars = [i for i in mine if keys[i][0] == "l"]
    # unit propagation on rows whose only unknown is a single l variable
    changed = True
    while changed:
        changed = False
        for c in rows_d:
            free = [(i, w) for i, w in c.terms if i not in fixed]
            if len(free) != 1 or keys[free[0][0]][0] != "l":
                continue
            i, w = free[0]
            base = sum(w2 * fixed[i2] for i2, w2 in c.terms if i2 in fixed)
            ok = [x for x in (0, 1) if _cmp(base + w * x, c.sense, c.rhs)]
            if not ok:
                return []
            if len(ok) == 1:
                fixed[i] = ok[0]
                changed = True
    free_l = [i for i in l_vars if i not in fixed]
    if len(free_l) > max_bits:
        raise GuardError(f"demand ({s},{d}) path {pi} has {len(free_l)} free placement bits")
    m = len(free_l)
    count = 1 << m
    cols = {i: k for k, i in enumerate(mine)}
    vals = np.zeros((count, len(mine)), dtype=np.int8)
    bits = (np.arange(count)[:, None] >> np.arange(m)[None, :]) & 1
    for k, i in enumerate(free_l):
        vals[:, cols[i]] = bits[:, k]
    for i, x in fixed.items():
        vals[:, cols[i]] = x
    # q = l AND r, then j = q AND q
    for i in mine:
        key = keys[i]
        if key[0] == "q":
            _, f, v, p, _, _ = key
            vals[:, cols[i]] = vals[:, cols[index[("l", f, v, s, d)]]] & vals[:, cols[index[("r", s, d, p)]]]
    for i in mine:
        key = keys[i]
        if key[0] == "j":
            _, f1, f2, u, v, p, _, _ = key
            vals[:, cols[i]] = vals[:, cols[index[("q", f1, u, p, s, d)]]] & vals[:, cols[index[("q", f2, v, p, s, d)]]]
    stats.placement_calls += count
    ok = np.ones(count, dtype=bool)
    for c in rows_d:
        lhs = np.zeros(count)
        for i, w in c.terms:
            lhs += w * vals[:, cols[i]]
        if c.sense == "<=":
            ok &= lhs <= c.rhs + 1e-9
        elif c.sense == ">=":
            ok &= lhs >= c.rhs - 1e-9
        else:
            ok &= np.abs(lhs - c.rhs) <= 1e-9
    rows = np.nonzero(ok)[0]
    if rows.size == 0:
        return []
    contrib = np.zeros((rows.size, len(shared)))
    for k, c in enumerate(shared):
        for i, w in c.terms:
            if i in cols:
                contrib[:, k] += w * vals[rows, cols[i]]
    ones = vals[rows].sum(axis=1)
    order = np.lexsort((rows, ones))
    kept: list[int] = []
    for a in order:
        if monotone:
            if any(np.all(contrib[b] <= contrib[a] + 1e-12) for b in kept):
                continue
        elif any(np.array_equal(contrib[b], contrib[a]) for b in kept):
            continue
        kept.append(int(a))
    return [
        (contrib[a], {i: int(vals[rows[a], cols[i]]) for i in mine})
        for a in kept
    ]
