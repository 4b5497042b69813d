"""Post-solve metrics and multi-solve analyses."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Hashable, Iterable, Mapping, Optional, Sequence

from .ilp_model import DcOnly, IlpModel, PlacementSolution, Strategy, compile_model
from .paths import build_path_set
from .solver import INFEASIBLE, OPTIMAL, TIMEOUT, SolverConfig, SolveResult, solve
from .topology import Scenario, Topology, intake_capacity, total_flow

log = logging.getLogger(__name__)

FEASIBLE = "feasible"
UNKNOWN = "unknown"


class AnalysisError(ValueError):
    pass


# --------------------------------------------------------------------------
# single solves

def build_model(scenario: Scenario, strategy: Strategy, k: int) -> IlpModel:
    ps = build_path_set(scenario.topology, strategy.effective_roles(scenario), scenario.demands, k)
    return compile_model(scenario, strategy, ps)


def solve_scenario(
    scenario: Scenario, strategy: Strategy, k: int, config: SolverConfig | None = None
) -> tuple[IlpModel, SolveResult]:
    """Compile and solve in one step."""
    model = build_model(scenario, strategy, k)
    return model, solve(model, config)


def shortest_path_bound(model: IlpModel) -> float:
    """Sum of flow times the hop count of each demand's first candidate."""
    return float(sum(
        dem.flow * cands[0].length for dem, cands in zip(model.scenario.demands, model.path_set.paths)
    ))


# --------------------------------------------------------------------------
# metrics

def resource_consumption(solution: PlacementSolution) -> float:
    """Bandwidth-hops used by the routed demands."""
    return float(sum(p.length * d.flow for p, d in zip(solution.paths, solution.demands)))


@dataclass(frozen=True)
class LoadProfile:
    loads: dict[tuple[int, int], float]
    max_load: float
    mean_load: float

    @property
    def total(self) -> float:
        return float(sum(self.loads.values()))


def link_loads(solution: PlacementSolution, topology: Topology) -> LoadProfile:
    """Per directed arc load in Gbps; arcs no demand uses are reported at 0."""
    loads = {arc: 0.0 for arc in sorted(topology.arcs)}
    for path, dem in zip(solution.paths, solution.demands):
        for arc in path.arcs:
            loads[arc] += dem.flow
    values = list(loads.values())
    return LoadProfile(
        loads,
        max(values, default=0.0),
        sum(values) / len(values) if values else 0.0,
    )


def normalize(series: Mapping[Hashable, float], baseline: Hashable) -> dict[Hashable, float]:
    """Divide every entry by ``series[baseline]``.

    Raises:
        AnalysisError: the baseline is missing or not positive.
    """
    if baseline not in series:
        raise AnalysisError(f"baseline {baseline!r} missing from series")
    base = series[baseline]
    if base is None or not base > 0:
        raise AnalysisError(f"baseline {baseline!r} must be positive, got {base!r}")
    return {key: (1.0 if key == baseline else value / base) for key, value in series.items()}


def rho_exceeds_omega(scenario: Scenario, node: int) -> bool:
    """Total offered flow above the node's intake capacity (the rho > Omega shortcut).

    Only a heuristic for endpoint nodes: flow sourced at the node never has
    to enter it. :func:`dc_intake_exceeded` is the exact necessary condition.
    """
    return total_flow(scenario.demands) > intake_capacity(scenario.topology, node) + 1e-9


def dc_intake_exceeded(scenario: Scenario, node: int) -> bool:
    """Flow that must enter ``node`` exceeds its intake capacity.

    Every demand not sourced at the node reaches it over an incoming arc when
    the node is the only DC, so when this holds DC-only placement there is
    infeasible. The converse does not hold.
    """
    inflow = sum(d.flow for d in scenario.demands if d.source != node)
    return inflow > intake_capacity(scenario.topology, node) + 1e-9


# --------------------------------------------------------------------------
# congestion

@dataclass
class CongestionReport:
    traffics: tuple[float, ...]
    candidates: tuple[int, ...]
    status: dict[tuple[float, int], str]
    objectives: dict[tuple[float, int], Optional[float]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def infeasible_at(self, traffic: float) -> frozenset[int]:
        return frozenset(v for v in self.candidates if self.status[(traffic, v)] == INFEASIBLE)

    def unknown_at(self, traffic: float) -> frozenset[int]:
        return frozenset(v for v in self.candidates if self.status[(traffic, v)] == UNKNOWN)

    @property
    def infeasible_sets(self) -> dict[float, frozenset[int]]:
        return {t: self.infeasible_at(t) for t in self.traffics}

    @property
    def newly_infeasible(self) -> dict[float, frozenset[int]]:
        out: dict[float, frozenset[int]] = {}
        seen: frozenset[int] = frozenset()
        for t in self.traffics:
            now = self.infeasible_at(t)
            out[t] = now - seen
            seen = seen | now
        return out

    @property
    def infeasible_node_count(self) -> dict[float, int]:
        return {t: len(self.infeasible_at(t)) for t in self.traffics}

    @property
    def congestion_point(self) -> Optional[float]:
        """Smallest traffic where every candidate is infeasible (unknowns never count)."""
        for t in self.traffics:
            if len(self.infeasible_at(t)) == len(self.candidates):
                return t
        return None

    @property
    def monotonicity_violations(self) -> list[tuple[float, int]]:
        """(traffic, node) pairs feasible again after being infeasible at a lower traffic."""
        bad = []
        for v in self.candidates:
            was_infeasible = False
            for t in self.traffics:
                st = self.status[(t, v)]
                if st == INFEASIBLE:
                    was_infeasible = True
                elif st == FEASIBLE and was_infeasible:
                    bad.append((t, v))
        return bad


def _ascending(values: Sequence[float], what: str) -> tuple[float, ...]:
    vals = tuple(float(v) for v in values)
    if not vals:
        raise AnalysisError(f"{what} list is empty")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise AnalysisError(f"{what} values must be strictly ascending")
    return vals


def congestion_sweep(
    template: Scenario,
    traffics: Sequence[float],
    candidates: Iterable[int],
    k: int = 5,
    config: SolverConfig | None = None,
) -> CongestionReport:
    """DC-only feasibility of every candidate DC node at every average traffic.

    Timeouts are recorded as unknown and left out of the congestion point.
    """
    tvals = _ascending(traffics, "traffic")
    nodes = tuple(sorted(set(candidates)))
    report = CongestionReport(tvals, nodes, {})
    for t in tvals:
        scaled = template.scaled_traffic(t)
        for v in nodes:
            _, res = solve_scenario(scaled.with_dc(v), DcOnly(), k, config)
            if res.status == OPTIMAL:
                st = FEASIBLE
            elif res.status == INFEASIBLE:
                st = INFEASIBLE
            elif res.feasible:
                st = FEASIBLE  # an incumbent already proves feasibility
            else:
                st = UNKNOWN
                msg = f"solver timeout at traffic {t:g}, DC {v}; excluded from congestion point"
                log.warning(msg)
                report.warnings.append(msg)
            report.status[(t, v)] = st
            report.objectives[(t, v)] = res.objective
    for t, v in report.monotonicity_violations:
        msg = f"DC {v} feasible at traffic {t:g} after being infeasible at lower traffic"
        log.warning(msg)
        report.warnings.append(msg)
    return report


# --------------------------------------------------------------------------
# inflection

AT_BOUND = "at-bound"
ABOVE_BOUND = "above-bound"
NOT_AT_BOUND = "not-at-bound"


@dataclass
class InflectionReport:
    theta: Optional[float]
    bound: float
    points: dict[float, str]
    objectives: dict[float, Optional[float]] = field(default_factory=dict)

    @property
    def infeasible(self) -> list[float]:
        return [t for t, st in self.points.items() if st == INFEASIBLE]

    @property
    def found(self) -> bool:
        return self.theta is not None


def inflection_point(
    template: Scenario,
    strategy: Strategy,
    thetas: Sequence[float],
    k: int = 3,
    config: SolverConfig | None = None,
    *,
    classify: bool = True,
) -> InflectionReport:
    """Smallest core budget whose optimum equals the shortest-path bound.

    Each budget is first solved with the bound as cutoff, which is fast when
    the bound is reachable. If it is not, and ``classify`` is set, a plain
    solve tells an infeasible point from one whose optimum is above the bound.
    Without ``classify`` such points are only marked as not at the bound.
    """
    tvals = _ascending(thetas, "theta")
    config = config or SolverConfig()
    tol = config.tolerance
    points: dict[float, str] = {}
    objectives: dict[float, Optional[float]] = {}
    found: Optional[float] = None
    bound = math.nan
    for theta in tvals:
        model = build_model(template.with_budget(cores_per_nfv_node=theta), strategy, k)
        bound = shortest_path_bound(model)
        probe = solve(model, replace(config, cutoff=bound + tol))
        if probe.status == OPTIMAL:
            points[theta] = AT_BOUND
            objectives[theta] = probe.objective
            if found is None:
                found = theta
            continue
        if probe.status == TIMEOUT or not classify:
            points[theta] = UNKNOWN if probe.status == TIMEOUT else NOT_AT_BOUND
            objectives[theta] = None
            continue
        full = solve(model, config)
        objectives[theta] = full.objective
        if full.status == INFEASIBLE:
            points[theta] = INFEASIBLE
        elif full.feasible:
            points[theta] = ABOVE_BOUND
        else:
            points[theta] = UNKNOWN
    return InflectionReport(found, bound, points, objectives)
