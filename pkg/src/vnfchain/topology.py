"""Scenario data model: topology, node roles, demands, VNF catalog, budgets.

Scenarios are immutable once loaded. Node ids are small 1-based integers so
that results can be compared directly against published node labels.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

MEMORY_MODES = ("off", "non_scaling", "scaling")
MAX_MB_PER_NODE = 3

_NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9]*$")


class ScenarioError(ValueError):
    """Base class for scenario loading problems."""


class ScenarioParseError(ScenarioError):
    """The file is not valid UTF-8 JSON."""


class ScenarioSchemaError(ScenarioError):
    """A required field is missing or has the wrong shape."""


class ScenarioValidationError(ScenarioError):
    """The scenario is well formed but violates an invariant."""


@dataclass(frozen=True)
class Topology:
    """Undirected capacitated graph; each link is used as two directed arcs."""

    nodes: tuple[int, ...]
    links: tuple[tuple[int, int, float], ...]

    def __post_init__(self) -> None:
        declared = set(self.nodes)
        if len(declared) != len(self.nodes):
            raise ScenarioValidationError("duplicate node id in topology")
        seen: set[frozenset[int]] = set()
        for i, j, cap in self.links:
            if i == j:
                raise ScenarioValidationError(f"self-loop on node {i}")
            if i not in declared or j not in declared:
                raise ScenarioValidationError(f"link ({i},{j}) uses an undeclared node")
            if not cap > 0:
                raise ScenarioValidationError(f"link ({i},{j}) has non-positive capacity")
            key = frozenset((i, j))
            if key in seen:
                raise ScenarioValidationError(f"duplicate link ({i},{j})")
            seen.add(key)

    @property
    def arcs(self) -> dict[tuple[int, int], float]:
        """Directed arcs in link order, forward arc before reverse arc."""
        out: dict[tuple[int, int], float] = {}
        for i, j, cap in self.links:
            out[(i, j)] = cap
            out[(j, i)] = cap
        return out

    def neighbors(self, node: int) -> list[int]:
        nbrs = [j for i, j, _ in self.links if i == node]
        nbrs += [i for i, j, _ in self.links if j == node]
        return sorted(nbrs)

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in self.nodes}
        for i, j, _ in self.links:
            adj[i].append(j)
            adj[j].append(i)
        for v in adj:
            adj[v].sort()
        return adj

    def degree(self, node: int) -> int:
        if node not in self.nodes:
            raise KeyError(f"unknown node {node}")
        return sum(1 for i, j, _ in self.links if node in (i, j))

    def has_link(self, i: int, j: int) -> bool:
        return any({i, j} == {a, b} for a, b, _ in self.links)


@dataclass(frozen=True)
class NodeRoles:
    dc_nodes: frozenset[int] = frozenset()
    nfv_nodes: frozenset[int] = frozenset()
    mb_locations: Mapping[int, tuple[str, ...]] = field(default_factory=dict)

    def __hash__(self) -> int:
        return hash((self.dc_nodes, self.nfv_nodes, tuple(sorted(self.mb_locations.items()))))

    @property
    def hosting(self) -> frozenset[int]:
        return self.dc_nodes | self.nfv_nodes


@dataclass(frozen=True)
class Demand:
    source: int
    dest: int
    flow: float

    @property
    def pair(self) -> tuple[int, int]:
        return (self.source, self.dest)


@dataclass(frozen=True)
class VnfSpec:
    name: str
    cores_per_gbps: float
    install_mem: float = 0.0
    mem_per_gbps: float = 0.0
    assumed: bool = False


@dataclass(frozen=True)
class ServiceChain:
    functions: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.functions)

    def __iter__(self):
        return iter(self.functions)

    def pairs(self) -> list[tuple[str, str]]:
        """Consecutive (f_k, f_k+1) dependencies."""
        f = self.functions
        return list(zip(f, f[1:]))

    def triples(self) -> list[tuple[str, str, str]]:
        f = self.functions
        return list(zip(f, f[1:], f[2:]))


@dataclass(frozen=True)
class ResourceBudget:
    """Per-NFV-node budgets. ``math.inf`` cores drops the per-node core rows."""

    cores_per_nfv_node: float = math.inf
    mem_per_nfv_node: float = math.inf
    memory_mode: str = "off"

    def __post_init__(self) -> None:
        if self.cores_per_nfv_node < 0 or self.mem_per_nfv_node < 0:
            raise ScenarioValidationError("resource budgets must be non-negative")
        if self.memory_mode not in MEMORY_MODES:
            raise ScenarioValidationError(
                f"memory_mode must be one of {MEMORY_MODES}, got {self.memory_mode!r}"
            )


@dataclass(frozen=True)
class Scenario:
    topology: Topology
    roles: NodeRoles
    demands: tuple[Demand, ...]
    catalog: tuple[VnfSpec, ...]
    chain: ServiceChain
    budget: ResourceBudget
    # Topology templates ship without demands.
    template: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        validate(self, require_demands=not self.template)

    @property
    def vnfs(self) -> dict[str, VnfSpec]:
        return {v.name: v for v in self.catalog}

    def with_demands(self, demands: Iterable[Demand]) -> Scenario:
        return replace(self, demands=tuple(demands), template=False)

    def with_budget(self, **changes: Any) -> Scenario:
        return replace(self, budget=replace(self.budget, **changes))

    def with_roles(
        self,
        dc_nodes: Iterable[int] | None = None,
        nfv_nodes: Iterable[int] | None = None,
    ) -> Scenario:
        roles = self.roles
        if dc_nodes is not None:
            roles = replace(roles, dc_nodes=frozenset(dc_nodes))
        if nfv_nodes is not None:
            roles = replace(roles, nfv_nodes=frozenset(nfv_nodes))
        return replace(self, roles=roles)

    def with_dc(self, node: int) -> Scenario:
        """Single DC at ``node``; the node stops being an NFV candidate."""
        return self.with_roles(dc_nodes=[node], nfv_nodes=self.roles.nfv_nodes - {node})

    def with_catalog(self, catalog: Iterable[VnfSpec]) -> Scenario:
        return replace(self, catalog=tuple(catalog))

    def scaled_traffic(self, avg_flow: float) -> Scenario:
        """Rescale every demand so the mean flow equals ``avg_flow``.

        Ratios between demands are preserved, so a file stored at 1 Gbps average
        reproduces any average exactly as :func:`build_enterprise_traffic` would.
        """
        if not self.demands:
            raise ScenarioValidationError("no demands to scale")
        flows = [Fraction(d.flow).limit_denominator(10**9) for d in self.demands]
        mean = sum(flows) / len(flows)
        target = Fraction(avg_flow).limit_denominator(10**9)
        scaled = [
            replace(d, flow=float(f * target / mean)) for d, f in zip(self.demands, flows)
        ]
        return self.with_demands(scaled)


def validate(sc: Scenario, *, require_demands: bool = True) -> None:
    """Check cross-references; raises :class:`ScenarioValidationError` naming the culprit."""
    nodes = set(sc.topology.nodes)
    roles = sc.roles
    for label, group in (("dc_nodes", roles.dc_nodes), ("nfv_nodes", roles.nfv_nodes)):
        missing = sorted(set(group) - nodes)
        if missing:
            raise ScenarioValidationError(f"{label} reference unknown nodes {missing}")
    both = sorted(roles.dc_nodes & roles.nfv_nodes)
    if both:
        raise ScenarioValidationError(f"nodes {both} are both DC and NFV-capable")

    names: set[str] = set()
    for spec in sc.catalog:
        if not _NAME_RE.match(spec.name):
            raise ScenarioValidationError(f"vnf name {spec.name!r} must be alphanumeric")
        if spec.name in names:
            raise ScenarioValidationError(f"duplicate vnf {spec.name!r}")
        for attr in ("cores_per_gbps", "install_mem", "mem_per_gbps"):
            if getattr(spec, attr) < 0:
                raise ScenarioValidationError(f"vnf {spec.name}: {attr} is negative")
        names.add(spec.name)

    chain = sc.chain.functions
    if not chain:
        raise ScenarioValidationError("service chain is empty")
    if len(set(chain)) != len(chain):
        raise ScenarioValidationError("service chain repeats a function")
    unknown = [f for f in chain if f not in names]
    if unknown:
        raise ScenarioValidationError(f"chain functions {unknown} missing from catalog")

    for node, funcs in roles.mb_locations.items():
        if node not in nodes:
            raise ScenarioValidationError(f"mb_locations references unknown node {node}")
        if len(funcs) > MAX_MB_PER_NODE:
            raise ScenarioValidationError(
                f"node {node} holds {len(funcs)} middle-boxes (max {MAX_MB_PER_NODE})"
            )
        bad = [f for f in funcs if f not in names]
        if bad:
            raise ScenarioValidationError(f"mb_locations[{node}] has unknown functions {bad}")

    if require_demands and not sc.demands:
        raise ScenarioValidationError("scenario has no demands")
    pairs: set[tuple[int, int]] = set()
    for d in sc.demands:
        if d.source == d.dest:
            raise ScenarioValidationError(f"demand ({d.source},{d.dest}) has source == dest")
        if d.source not in nodes or d.dest not in nodes:
            raise ScenarioValidationError(f"demand ({d.source},{d.dest}) uses an unknown node")
        if not d.flow > 0:
            raise ScenarioValidationError(f"demand ({d.source},{d.dest}) has non-positive flow")
        if d.pair in pairs:
            raise ScenarioValidationError(f"demand ({d.source},{d.dest}) is duplicated")
        pairs.add(d.pair)


# --------------------------------------------------------------------------
# File I/O

_REQUIRED = (
    "nodes", "links", "dc_nodes", "nfv_nodes", "mb_locations", "demands",
    "vnfs", "chain", "theta", "upsilon_gb", "memory_mode",
)


def _need(obj: Mapping[str, Any], key: str, where: str) -> Any:
    if not isinstance(obj, Mapping) or key not in obj:
        raise ScenarioSchemaError(f"missing field '{key}' in {where}")
    return obj[key]


def _number(value: Any, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioSchemaError(f"{where} must be a number")
    return float(value)


def _budget_value(value: Any, where: str) -> float:
    return math.inf if value is None else _number(value, where)


def scenario_from_dict(doc: Mapping[str, Any], *, allow_empty_demands: bool = False) -> Scenario:
    if not isinstance(doc, Mapping):
        raise ScenarioSchemaError("scenario document must be a JSON object")
    for key in _REQUIRED:
        _need(doc, key, "scenario")
    try:
        nodes = tuple(int(v) for v in doc["nodes"])
        links = []
        for k, link in enumerate(doc["links"]):
            if not isinstance(link, (list, tuple)) or len(link) != 3:
                raise ScenarioSchemaError(f"links[{k}] must be [i, j, capacity_gbps]")
            links.append((int(link[0]), int(link[1]), _number(link[2], f"links[{k}] capacity")))
        mb = {
            int(node): tuple(str(f) for f in funcs)
            for node, funcs in dict(doc["mb_locations"]).items()
        }
        demands = []
        for k, d in enumerate(doc["demands"]):
            where = f"demands[{k}]"
            demands.append(
                Demand(
                    int(_need(d, "s", where)),
                    int(_need(d, "d", where)),
                    _number(_need(d, "gbps", where), f"{where}.gbps"),
                )
            )
        catalog = []
        for k, v in enumerate(doc["vnfs"]):
            where = f"vnfs[{k}]"
            catalog.append(
                VnfSpec(
                    name=str(_need(v, "name", where)),
                    cores_per_gbps=_number(_need(v, "cores_per_gbps", where), f"{where}.cores_per_gbps"),
                    install_mem=_number(_need(v, "install_mem_gb", where), f"{where}.install_mem_gb"),
                    mem_per_gbps=_number(_need(v, "mem_per_gbps", where), f"{where}.mem_per_gbps"),
                    assumed=bool(v.get("assumed", False)),
                )
            )
        topology = Topology(nodes, tuple(links))
        roles = NodeRoles(
            frozenset(int(v) for v in doc["dc_nodes"]),
            frozenset(int(v) for v in doc["nfv_nodes"]),
            mb,
        )
        budget = ResourceBudget(
            _budget_value(doc["theta"], "theta"),
            _budget_value(doc["upsilon_gb"], "upsilon_gb"),
            str(doc["memory_mode"]),
        )
        chain = ServiceChain(tuple(str(f) for f in doc["chain"]))
    except (TypeError, AttributeError) as exc:
        raise ScenarioSchemaError(f"malformed scenario: {exc}") from exc

    template = allow_empty_demands and not demands
    return Scenario(topology, roles, tuple(demands), tuple(catalog), chain, budget, template)


def load_scenario(path: str | Path, *, allow_empty_demands: bool = False) -> Scenario:
    """Read and validate a scenario JSON file.

    Raises:
        ScenarioParseError: the file is not JSON.
        ScenarioSchemaError: a field is missing or malformed (message names it).
        ScenarioValidationError: an invariant is violated (message names it).
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from exc
    return scenario_from_dict(doc, allow_empty_demands=allow_empty_demands)


def _json_number(x: float) -> float | int | None:
    if math.isinf(x):
        return None
    return int(x) if float(x).is_integer() else x


def scenario_to_dict(sc: Scenario) -> dict[str, Any]:
    return {
        "nodes": list(sc.topology.nodes),
        "links": [[i, j, _json_number(c)] for i, j, c in sc.topology.links],
        "dc_nodes": sorted(sc.roles.dc_nodes),
        "nfv_nodes": sorted(sc.roles.nfv_nodes),
        "mb_locations": {str(k): list(v) for k, v in sorted(sc.roles.mb_locations.items())},
        "demands": [{"s": d.source, "d": d.dest, "gbps": _json_number(d.flow)} for d in sc.demands],
        "vnfs": [
            {
                "name": v.name,
                "cores_per_gbps": _json_number(v.cores_per_gbps),
                "install_mem_gb": _json_number(v.install_mem),
                "mem_per_gbps": _json_number(v.mem_per_gbps),
                "assumed": v.assumed,
            }
            for v in sc.catalog
        ],
        "chain": list(sc.chain.functions),
        "theta": _json_number(sc.budget.cores_per_nfv_node),
        "upsilon_gb": _json_number(sc.budget.mem_per_nfv_node),
        "memory_mode": sc.budget.memory_mode,
    }


def save_scenario(sc: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(sc), indent=2) + "\n", encoding="utf-8")


def bundled_path(name: str) -> Path:
    """Filesystem path of a scenario file shipped with the package."""
    return Path(str(resources.files("vnfchain") / "data" / name))


def load_bundled(name: str, **kwargs: Any) -> Scenario:
    return load_scenario(bundled_path(name), **kwargs)


# --------------------------------------------------------------------------
# Traffic and derived scalars

def build_enterprise_traffic(
    endpoints: Sequence[int], hq: int, avg_flow: float, hq_ratio: float = 1.5
) -> list[Demand]:
    """Full-mesh enterprise WAN demands between ``endpoints``.

    Flows to or from the headquarters carry ``hq_ratio`` times the branch
    flow; the branch flow is chosen so that the mean over all ordered pairs
    equals ``avg_flow`` exactly.
    """
    if hq not in endpoints:
        raise ScenarioValidationError(f"hq {hq} is not one of the endpoints")
    if len(set(endpoints)) < 2:
        raise ScenarioValidationError("need at least two distinct endpoints")
    if not avg_flow > 0 or not hq_ratio > 0:
        raise ScenarioValidationError("avg_flow and hq_ratio must be positive")
    eps = list(dict.fromkeys(endpoints))
    pairs = [(s, d) for s in eps for d in eps if s != d]
    ratio = Fraction(hq_ratio).limit_denominator(10**9)
    avg = Fraction(avg_flow).limit_denominator(10**9)
    n_hq = sum(1 for s, d in pairs if hq in (s, d))
    n_br = len(pairs) - n_hq
    branch = avg * len(pairs) / (n_hq * ratio + n_br)
    return [
        Demand(s, d, float(branch * ratio if hq in (s, d) else branch)) for s, d in pairs
    ]


def intake_capacity(topology: Topology, node: int) -> float:
    """Flow intake capacity of a node: total capacity of arcs entering it.

    With uniform link capacity this is degree times capacity.
    """
    if node not in topology.nodes:
        raise KeyError(f"unknown node {node}")
    return float(sum(c for (i, j), c in topology.arcs.items() if j == node))


def total_flow(demands: Iterable[Demand]) -> float:
    return float(sum(d.flow for d in demands))


# --------------------------------------------------------------------------
# Consistency checks for the bundled NSFNet digitization

NSFNET_DEGREE_TWO = (4, 12)
NSFNET_HIGH_DEGREE = (3, 8, 10)
NSFNET_CONGESTION_SETS = {7.5: (4, 12), 10.0: (1, 2, 11, 14), 12.5: (6, 7, 9, 13), 15.0: (3, 5, 8, 10)}
NSFNET_OMEGA_EXCEPTIONS = (1, 2, 5, 11, 14)


def nsfnet_consistency(sc: Scenario) -> list[tuple[str, bool, str]]:
    """Degree checks that pin the hand-digitized NSFNet adjacency.

    Returns ``(check, passed, detail)`` rows. Nodes outside the published
    exceptions must become DC-infeasible exactly at the first traffic value
    where total flow exceeds their intake capacity.
    """
    topo = sc.topology
    deg = {v: topo.degree(v) for v in topo.nodes}
    rows: list[tuple[str, bool, str]] = []
    rows.append((
        "degree(4)=degree(12)=2",
        all(deg.get(v) == 2 for v in NSFNET_DEGREE_TWO),
        ", ".join(f"deg({v})={deg.get(v)}" for v in NSFNET_DEGREE_TWO),
    ))
    top = max(deg.values())
    rows.append((
        "nodes 3, 8, 10 have maximal degree >= 4",
        all(deg.get(v) == top and top >= 4 for v in NSFNET_HIGH_DEGREE),
        ", ".join(f"deg({v})={deg.get(v)}" for v in NSFNET_HIGH_DEGREE) + f"; max={top}",
    ))
    n_flows = len(sc.demands)
    bad = []
    for traffic, group in NSFNET_CONGESTION_SETS.items():
        rho = traffic * n_flows
        prev = [t for t in NSFNET_CONGESTION_SETS if t < traffic]
        prev_rho = max(prev) * n_flows if prev else 0.0
        for v in group:
            if v in NSFNET_OMEGA_EXCEPTIONS:
                continue
            omega = intake_capacity(topo, v)
            if not (rho > omega >= prev_rho):
                bad.append(f"node {v}: omega={omega:g} vs rho={rho:g}")
    rows.append((
        "reference congestion sets follow rho > omega outside exceptions",
        not bad,
        "; ".join(bad) or "ok",
    ))
    return rows
