"""0-1 ILP for joint service-chain placement and unsplittable routing.

``compile_model`` turns a scenario, a strategy and a candidate path set into an
explicit list of binary variables and linear rows. Variable families:

* ``r`` (dem, path) -- demand routed on the candidate path
* ``l`` (function, node, dem) -- function hosted at node for the demand
* ``q`` (function, node, path, dem) -- ``l AND r``
* ``j`` (f1, f2, u, v, path, dem) -- ``q(f1,u) AND q(f2,v)`` for chain neighbours
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

from .paths import Path, PathSet
from .topology import Demand, NodeRoles, Scenario

VarKey = tuple
Terms = tuple[tuple[int, float], ...]

SENSES = ("<=", "=", ">=")


class ModelError(ValueError):
    """The inputs cannot be compiled into a model."""


class InfeasibleAssignmentError(ValueError):
    """An assignment violates a model row; the message names the row."""


# --------------------------------------------------------------------------
# Strategies

class Strategy:
    """Service-chaining strategy; decides which nodes may host functions."""

    id: str = ""

    def effective_roles(self, scenario: Scenario) -> NodeRoles:
        raise NotImplementedError

    @property
    def is_mb(self) -> bool:
        return False


@dataclass(frozen=True)
class MB(Strategy):
    """Fixed middle-boxes: ``placements`` maps node -> functions hardwired there."""

    placements: tuple[tuple[int, tuple[str, ...]], ...]
    id: str = field(default="mb", init=False)

    @classmethod
    def of(cls, placements: Mapping[int, Iterable[str]]) -> MB:
        return cls(tuple(sorted((int(n), tuple(fs)) for n, fs in placements.items())))

    @property
    def is_mb(self) -> bool:
        return True

    def location(self) -> dict[str, int]:
        return {f: node for node, fs in self.placements for f in fs}

    def check_chain(self, chain: Iterable[str]) -> None:
        seen: dict[str, int] = {}
        for node, fs in self.placements:
            if len(fs) > 3:
                raise ModelError(f"MB node {node} holds {len(fs)} functions (max 3)")
            for f in fs:
                if f in seen:
                    raise ModelError(f"function {f} placed on nodes {seen[f]} and {node}")
                seen[f] = node
        missing = [f for f in chain if f not in seen]
        if missing:
            raise ModelError(f"MB placement does not cover chain functions {missing}")
        extra = sorted(set(seen) - set(chain))
        if extra:
            raise ModelError(f"MB placement has functions outside the chain {extra}")

    def effective_roles(self, scenario: Scenario) -> NodeRoles:
        return NodeRoles(frozenset(), frozenset(n for n, _ in self.placements), {})


@dataclass(frozen=True)
class DcOnly(Strategy):
    id: str = field(default="dc-only", init=False)

    def effective_roles(self, scenario: Scenario) -> NodeRoles:
        return NodeRoles(scenario.roles.dc_nodes, frozenset(), {})


@dataclass(frozen=True)
class DcNfv(Strategy):
    """DC plus the given NFV-capable nodes (a node that is also the DC acts as DC)."""

    nfv: frozenset[int]
    id: str = field(default="dc-nfv", init=False)

    def effective_roles(self, scenario: Scenario) -> NodeRoles:
        dc = scenario.roles.dc_nodes
        return NodeRoles(dc, frozenset(self.nfv) - dc, {})


@dataclass(frozen=True)
class DcNfvAll(Strategy):
    id: str = field(default="dc-nfv-all", init=False)

    def effective_roles(self, scenario: Scenario) -> NodeRoles:
        dc = scenario.roles.dc_nodes
        return NodeRoles(dc, frozenset(scenario.topology.nodes) - dc, {})


@dataclass(frozen=True)
class NfvAll(Strategy):
    id: str = field(default="nfv-all", init=False)

    def effective_roles(self, scenario: Scenario) -> NodeRoles:
        return NodeRoles(frozenset(), frozenset(scenario.topology.nodes), {})


# --------------------------------------------------------------------------
# Model container

@dataclass(frozen=True)
class Constraint:
    name: str
    family: str
    label: str
    terms: Terms
    sense: str
    rhs: float

    def activity(self, values: list[int]) -> float:
        return sum(c * values[i] for i, c in self.terms)

    def satisfied(self, values: list[int], tol: float = 1e-9) -> bool:
        lhs = self.activity(values)
        if self.sense == "<=":
            return lhs <= self.rhs + tol
        if self.sense == ">=":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol


@dataclass
class IlpModel:
    variables: list[VarKey]
    constraints: list[Constraint]
    objective: Terms
    scenario: Scenario
    strategy: Strategy
    path_set: PathSet
    roles: NodeRoles
    index: dict[VarKey, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.index:
            self.index = {k: i for i, k in enumerate(self.variables)}

    def name(self, i: int) -> str:
        return var_name(self.variables[i])

    def family_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for c in self.constraints:
            out[c.family] = out.get(c.family, 0) + 1
        return out

    def var_counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for k in self.variables:
            out[k[0]] = out.get(k[0], 0) + 1
        return out

    def objective_value(self, values: list[int]) -> float:
        return float(sum(c * values[i] for i, c in self.objective))

    def violated(self, values: list[int]) -> list[Constraint]:
        return [c for c in self.constraints if not c.satisfied(values)]


def var_name(key: VarKey) -> str:
    kind = key[0]
    if kind == "r":
        _, s, d, p = key
        return f"r_{s}_{d}_p{p}"
    if kind == "l":
        _, f, v, s, d = key
        return f"l_{f}_{v}_{s}_{d}"
    if kind == "q":
        _, f, v, p, s, d = key
        return f"q_{f}_{v}_p{p}_{s}_{d}"
    if kind == "j":
        _, f1, f2, u, v, p, s, d = key
        return f"j_{f1}_{f2}_{u}_{v}_p{p}_{s}_{d}"
    raise KeyError(key)


# --------------------------------------------------------------------------
# Compilation

def _on_path_hosting(path: Path, roles: NodeRoles) -> list[int]:
    return [v for v in path.nodes if v in roles.hosting]


def compile_model(scenario: Scenario, strategy: Strategy, path_set: PathSet) -> IlpModel:
    """Build the ILP rows for ``strategy`` over the candidate paths in ``path_set``.

    Raises:
        ModelError: MB placement does not cover the chain, the path set was
            built for other demands/roles, or a demand has no candidates.
    """
    roles = strategy.effective_roles(scenario)
    if path_set.demands != scenario.demands:
        raise ModelError("path set was built for different demands")
    if path_set.roles != roles:
        raise ModelError("path set was built for different node roles than the strategy implies")
    chain = scenario.chain.functions
    vnfs = scenario.vnfs
    mb_loc: dict[str, int] | None = None
    if isinstance(strategy, MB):
        strategy.check_chain(chain)
        mb_loc = strategy.location()
    for di, cands in enumerate(path_set.paths):
        if not cands:
            dem = scenario.demands[di]
            raise ModelError(f"demand ({dem.source},{dem.dest}) has an empty candidate list")

    variables: list[VarKey] = []
    index: dict[VarKey, int] = {}

    def add(key: VarKey) -> int:
        index[key] = len(variables)
        variables.append(key)
        return index[key]

    demands = scenario.demands
    # r
    for di, dem in enumerate(demands):
        for pi, _ in enumerate(path_set.paths[di]):
            add(("r", dem.source, dem.dest, pi))
    # l
    for di, dem in enumerate(demands):
        on_any = sorted({v for p in path_set.paths[di] for v in _on_path_hosting(p, roles)})
        for f in chain:
            for v in on_any:
                if mb_loc is not None and mb_loc[f] != v:
                    continue
                add(("l", f, v, dem.source, dem.dest))
    # q
    for di, dem in enumerate(demands):
        s, d = dem.pair
        for pi, path in enumerate(path_set.paths[di]):
            for v in _on_path_hosting(path, roles):
                for f in chain:
                    if ("l", f, v, s, d) in index:
                        add(("q", f, v, pi, s, d))
    # j
    for di, dem in enumerate(demands):
        s, d = dem.pair
        for pi, _ in enumerate(path_set.paths[di]):
            for u, v in path_set.pairs[(di, pi)]:
                for f1, f2 in scenario.chain.pairs():
                    if ("q", f1, u, pi, s, d) in index and ("q", f2, v, pi, s, d) in index:
                        add(("j", f1, f2, u, v, pi, s, d))

    rows: list[Constraint] = []

    def row(name: str, family: str, label: str, terms: list[tuple[VarKey, float]], sense: str, rhs: float) -> None:
        merged: dict[int, float] = {}
        for key, coef in terms:
            if key in index and coef != 0:
                merged[index[key]] = merged.get(index[key], 0.0) + coef
        rows.append(Constraint(name, family, label, tuple(merged.items()), sense, float(rhs)))

    vname = var_name
    objective: list[tuple[int, float]] = []
    for di, dem in enumerate(demands):
        for pi, path in enumerate(path_set.paths[di]):
            objective.append((index[("r", dem.source, dem.dest, pi)], path.length * dem.flow))

    # (2) single path per demand
    for di, dem in enumerate(demands):
        s, d = dem.pair
        row(f"eq2_{s}_{d}", "eq2", f"Eq.(2) demand ({s},{d})",
            [(("r", s, d, pi), 1.0) for pi in range(len(path_set.paths[di]))], "=", 1)

    # (3) arc capacity
    for (i, j), cap in scenario.topology.arcs.items():
        terms = []
        for di, pi in path_set.link_index.get((i, j), ()):
            dem = demands[di]
            terms.append((("r", dem.source, dem.dest, pi), dem.flow))
        row(f"eq3_{i}_{j}", "eq3", f"Eq.(3) arc ({i},{j})", terms, "<=", cap)

    # (4)-(6) NFV node resources; DCs and middle-boxes are uncapacitated
    budget = scenario.budget
    if mb_loc is None:
        nfv_sorted = sorted(roles.nfv_nodes)
        if not math.isinf(budget.cores_per_nfv_node):
            for v in nfv_sorted:
                terms = [
                    (("l", f, v, dem.source, dem.dest), dem.flow * vnfs[f].cores_per_gbps)
                    for dem in demands for f in chain
                ]
                row(f"eq4_{v}", "eq4", f"Eq.(4) cores at node {v}", terms, "<=", budget.cores_per_nfv_node)
        if budget.memory_mode != "off" and not math.isinf(budget.mem_per_nfv_node):
            scaling = budget.memory_mode == "scaling"
            eq = "eq6" if scaling else "eq5"
            for v in nfv_sorted:
                terms = [
                    (("l", f, v, dem.source, dem.dest),
                     dem.flow * vnfs[f].mem_per_gbps if scaling else vnfs[f].install_mem)
                    for dem in demands for f in chain
                ]
                row(f"{eq}_{v}", eq, f"Eq.({eq[2:]}) memory at node {v}", terms, "<=", budget.mem_per_nfv_node)

    # (14)-(16) q = l AND r
    for key in variables:
        if key[0] != "q":
            continue
        _, f, v, pi, s, d = key
        l_key, r_key = ("l", f, v, s, d), ("r", s, d, pi)
        n = vname(key)
        lab = f"function {f} node {v} path {pi} demand ({s},{d})"
        row(f"eq14_{n}", "eq14", f"Eq.(14) {lab}", [(key, 1.0), (l_key, -1.0)], "<=", 0)
        row(f"eq15_{n}", "eq15", f"Eq.(15) {lab}", [(key, 1.0), (r_key, -1.0)], "<=", 0)
        row(f"eq16_{n}", "eq16", f"Eq.(16) {lab}", [(key, 1.0), (l_key, -1.0), (r_key, -1.0)], ">=", -1)

    # (8) every function hosted on some candidate path
    for di, dem in enumerate(demands):
        s, d = dem.pair
        for f in chain:
            terms = [
                (("q", f, v, pi, s, d), 1.0)
                for pi, path in enumerate(path_set.paths[di])
                for v in _on_path_hosting(path, roles)
            ]
            row(f"eq8_{f}_{s}_{d}", "eq8", f"Eq.(8) function {f} demand ({s},{d})", terms, ">=", 1)

    # (9) a function in a DC pulls its successor into the same DC
    for di, dem in enumerate(demands):
        s, d = dem.pair
        for pi, path in enumerate(path_set.paths[di]):
            for u in path.nodes:
                if u not in roles.dc_nodes:
                    continue
                for f1, f2 in scenario.chain.pairs():
                    if ("q", f1, u, pi, s, d) not in index:
                        continue
                    row(f"eq9_{f1}_{f2}_{u}_p{pi}_{s}_{d}", "eq9",
                        f"Eq.(9) {f1}->{f2} DC {u} path {pi} demand ({s},{d})",
                        [(("j", f1, f2, u, u, pi, s, d), 1.0), (("q", f1, u, pi, s, d), -1.0)],
                        ">=", 0)

    # (17)-(19) j = q AND q
    for key in variables:
        if key[0] != "j":
            continue
        _, f1, f2, u, v, pi, s, d = key
        qa, qb = ("q", f1, u, pi, s, d), ("q", f2, v, pi, s, d)
        n = vname(key)
        lab = f"{f1}->{f2} nodes ({u},{v}) path {pi} demand ({s},{d})"
        row(f"eq17_{n}", "eq17", f"Eq.(17) {lab}", [(key, 1.0), (qa, -1.0)], "<=", 0)
        row(f"eq18_{n}", "eq18", f"Eq.(18) {lab}", [(key, 1.0), (qb, -1.0)], "<=", 0)
        row(f"eq19_{n}", "eq19", f"Eq.(19) {lab}", [(key, 1.0), (qa, -1.0), (qb, -1.0)], ">=", -1)

    # (11) each chain dependency realised on some path
    for di, dem in enumerate(demands):
        s, d = dem.pair
        for f1, f2 in scenario.chain.pairs():
            terms = [
                (("j", f1, f2, u, v, pi, s, d), 1.0)
                for pi in range(len(path_set.paths[di]))
                for u, v in path_set.pairs[(di, pi)]
            ]
            row(f"eq11_{f1}_{f2}_{s}_{d}", "eq11", f"Eq.(11) {f1}->{f2} demand ({s},{d})", terms, ">=", 1)

    # (12) f2->f3 out of an NFV node requires f1->f2 into it
    for di, dem in enumerate(demands):
        s, d = dem.pair
        for pi, path in enumerate(path_set.paths[di]):
            nodes = path.nodes
            for f1, f2, f3 in scenario.chain.triples():
                for a, u in enumerate(nodes):
                    if u not in roles.nfv_nodes:
                        continue
                    for v in nodes[a:]:
                        if v not in roles.hosting:
                            continue
                        rhs_key = ("j", f2, f3, u, v, pi, s, d)
                        if rhs_key not in index:
                            continue
                        terms = [
                            (("j", f1, f2, t, u, pi, s, d), 1.0)
                            for t in nodes[: a + 1] if t in roles.nfv_nodes
                        ]
                        terms.append((rhs_key, -1.0))
                        row(f"eq12_{f1}_{f2}_{f3}_{u}_{v}_p{pi}_{s}_{d}", "eq12",
                            f"Eq.(12) {f1}->{f2}->{f3} nodes ({u},{v}) path {pi} demand ({s},{d})",
                            terms, ">=", 0)

    # (13) at most one realisation of each dependency per path
    for di, dem in enumerate(demands):
        s, d = dem.pair
        for pi in range(len(path_set.paths[di])):
            for f1, f2 in scenario.chain.pairs():
                terms = [(("j", f1, f2, u, v, pi, s, d), 1.0) for u, v in path_set.pairs[(di, pi)]]
                if not any(k in index for k, _ in terms):
                    continue
                row(f"eq13_{f1}_{f2}_p{pi}_{s}_{d}", "eq13",
                    f"Eq.(13) {f1}->{f2} path {pi} demand ({s},{d})", terms, "<=", 1)

    # tightening: no hosting off the chosen path
    dem_index = {dem.pair: di for di, dem in enumerate(demands)}
    for key in variables:
        if key[0] != "l":
            continue
        _, f, v, s, d = key
        di = dem_index[(s, d)]
        terms = [(key, 1.0)] + [
            (("r", s, d, pi), -1.0) for pi, p in enumerate(path_set.paths[di]) if v in p
        ]
        row(f"tight_{vname(key)[2:]}", "tight", f"tightening {f} node {v} demand ({s},{d})",
            terms, "<=", 0)

    if mb_loc is not None:
        for key in variables:
            if key[0] == "l":
                _, f, v, s, d = key
                row(f"mbfix_{vname(key)[2:]}", "mbfix", f"MB {f} fixed at node {v} demand ({s},{d})",
                    [(key, 1.0)], "=", 1)

    return IlpModel(variables, rows, tuple(objective), scenario, strategy, path_set, roles, index)


# --------------------------------------------------------------------------
# Decoding

@dataclass(frozen=True)
class PlacementSolution:
    """Chosen path and ordered (function, node) placements for every demand."""

    demands: tuple[Demand, ...]
    paths: tuple[Path, ...]
    placements: tuple[tuple[tuple[str, int], ...], ...]
    objective: float


Assignment = Mapping[Union[VarKey, str], int]


def _values(model: IlpModel, assignment: Assignment) -> list[int]:
    by_name = {var_name(k): i for i, k in enumerate(model.variables)}
    values: list[int | None] = [None] * len(model.variables)
    for key, val in assignment.items():
        i = by_name.get(key) if isinstance(key, str) else model.index.get(key)
        if i is None:
            raise InfeasibleAssignmentError(f"unknown variable {key!r}")
        if val not in (0, 1):
            raise InfeasibleAssignmentError(f"variable {var_name(model.variables[i])} is not binary")
        values[i] = int(val)
    missing = [var_name(model.variables[i]) for i, v in enumerate(values) if v is None]
    if missing:
        raise InfeasibleAssignmentError(f"assignment misses variables {missing[:5]}")
    return values  # type: ignore[return-value]


def decode_values(model: IlpModel, values: list[int]) -> PlacementSolution:
    for c in model.constraints:
        if not c.satisfied(values):
            raise InfeasibleAssignmentError(f"assignment violates {c.label} [{c.name}]")
    scenario = model.scenario
    chain_pos = {f: k for k, f in enumerate(scenario.chain.functions)}
    paths: list[Path] = []
    placements: list[tuple[tuple[str, int], ...]] = []
    for di, dem in enumerate(scenario.demands):
        s, d = dem.pair
        chosen = [pi for pi in range(len(model.path_set.paths[di])) if values[model.index[("r", s, d, pi)]]]
        pi = chosen[0]
        path = model.path_set.paths[di][pi]
        paths.append(path)
        # canonical placement: l := max over paths of q, which equals q on the chosen path
        placed = []
        for v in path.nodes:
            for f in scenario.chain.functions:
                i = model.index.get(("q", f, v, pi, s, d))
                if i is not None and values[i] == 1:
                    placed.append((f, v))
        placed.sort(key=lambda fv: (chain_pos[fv[0]], path.position(fv[1])))
        placements.append(tuple(placed))
    objective = float(sum(p.length * dem.flow for p, dem in zip(paths, scenario.demands)))
    return PlacementSolution(scenario.demands, tuple(paths), tuple(placements), objective)


def decode_solution(model: IlpModel, assignment: Assignment) -> PlacementSolution:
    """Map a complete 0-1 assignment back to paths and placements.

    Raises:
        InfeasibleAssignmentError: the assignment is incomplete, non-binary,
            or violates a row (the message carries the row label).
    """
    return decode_values(model, _values(model, assignment))


# --------------------------------------------------------------------------
# LP export

_LP_LINE = 78


def _fmt(c: float) -> str:
    return "%.15g" % c


def _lp_expr(model: IlpModel, terms: Terms) -> list[str]:
    out: list[str] = []
    for k, (i, c) in enumerate(terms):
        name = model.name(i)
        if k == 0:
            out.append(f"- {_fmt(-c)} {name}" if c < 0 else f"{_fmt(c)} {name}")
        else:
            out.append(f"- {_fmt(-c)} {name}" if c < 0 else f"+ {_fmt(c)} {name}")
    return out


def _wrap(head: str, tokens: list[str]) -> list[str]:
    lines: list[str] = []
    cur = head
    for tok in tokens:
        if len(cur) + 1 + len(tok) > _LP_LINE and cur.strip():
            lines.append(cur)
            cur = "   " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    lines.append(cur)
    return lines


def lp_text(model: IlpModel) -> str:
    """Render ``model`` in CPLEX LP format (deterministic)."""
    first = model.name(0) if model.variables else "x"
    lines = ["\\ service-chain placement model", "Minimize"]
    obj = _lp_expr(model, model.objective) or [f"0 {first}"]
    lines += _wrap(" obj:", obj)
    lines.append("Subject To")
    for c in model.constraints:
        expr = _lp_expr(model, c.terms) or [f"0 {first}"]
        lines += _wrap(f" {c.name}:", expr + [c.sense, _fmt(c.rhs)])
    lines.append("Binary")
    lines += _wrap("", [model.name(i) for i in range(len(model.variables))])
    lines.append("End")
    return "\n".join(lines) + "\n"


def export_lp(model: IlpModel, path) -> None:
    """Write ``model`` as an LP file; identical models give identical bytes."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(lp_text(model))
