"""Experiment orchestration: placement enumeration, parameter sweeps, CSV output."""

from __future__ import annotations

import csv
import io
import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .analysis import link_loads
from .ilp_model import MB, DcNfv, DcNfvAll, DcOnly, ModelError, NfvAll, Strategy, compile_model
from .paths import PathSetError, build_path_set
from .solver import INFEASIBLE, OPTIMAL, TIMEOUT, SolverConfig, solve
from .topology import MAX_MB_PER_NODE, Scenario, ScenarioError

FAMILIES = ("mb", "dc-only", "dc-nfv", "dc-nfv-all", "nfv-all")
CSV_COLUMNS = (
    "strategy", "placement", "theta", "traffic_gbps", "upsilon_gb",
    "status", "omega", "omega_norm", "max_link_load_gbps", "wall_ms",
)
BASELINE = "dc-nfv-all"


class HarnessError(ValueError):
    pass


# --------------------------------------------------------------------------
# placements

@dataclass(frozen=True)
class Placement:
    """One concrete configuration of a strategy family."""

    family: str
    strategy: Strategy
    dc: Optional[int] = None
    x: Optional[int] = None

    @property
    def strategy_id(self) -> str:
        return f"{self.family}-{self.x}" if self.family == "dc-nfv" else self.family

    def encode(self, scenario: Scenario) -> str:
        s = self.strategy
        if isinstance(s, MB):
            return "mb=" + ",".join(f"{n}:{'|'.join(fs)}" for n, fs in s.placements)
        roles = s.effective_roles(self.apply(scenario))
        dc = ",".join(str(v) for v in sorted(roles.dc_nodes))
        return f"dc={dc};nfv=" + ",".join(str(v) for v in sorted(roles.nfv_nodes))

    def apply(self, scenario: Scenario) -> Scenario:
        return scenario.with_dc(self.dc) if self.dc is not None else scenario


def mb_segmentations(
    chain: Sequence[str], nodes: Iterable[int], per_node: int = MAX_MB_PER_NODE
) -> list[dict[int, tuple[str, ...]]]:
    """Chain cut into consecutive blocks of at most ``per_node`` functions, one block per distinct node."""
    chain = tuple(chain)
    nodes = sorted(set(nodes))
    out = []
    n = len(chain)
    for parts in range(1, min(n, len(nodes)) + 1):
        for cuts in itertools.combinations(range(1, n), parts - 1):
            bounds = (0, *cuts, n)
            blocks = [chain[a:b] for a, b in zip(bounds, bounds[1:])]
            if any(len(b) > per_node for b in blocks):
                continue
            for hosts in itertools.permutations(nodes, parts):
                out.append(dict(zip(hosts, blocks)))
    return out


def enumerate_placements(
    family: str,
    candidates: Iterable[int],
    x: Optional[int] = None,
    *,
    dc_nodes: Optional[Iterable[int]] = None,
    chain: Sequence[str] = (),
) -> list[Placement]:
    """All configurations of a strategy family.

    ``candidates`` are the DC nodes for dc-only and dc-nfv-all, the NFV-capable
    nodes for dc-nfv (crossed with ``dc_nodes``) and the middle-box hosts for mb.

    Raises:
        HarnessError: unknown family, or ``x`` larger than the candidate set.
    """
    cands = sorted(set(candidates))
    if family == "dc-only":
        return [Placement(family, DcOnly(), dc=v) for v in cands]
    if family == "dc-nfv-all":
        return [Placement(family, DcNfvAll(), dc=v) for v in cands]
    if family == "nfv-all":
        return [Placement(family, NfvAll())]
    if family == "dc-nfv":
        if x is None or x < 0:
            raise HarnessError("dc-nfv needs a non-negative x")
        if x > len(cands):
            raise HarnessError(f"x={x} exceeds the {len(cands)} candidate NFV nodes")
        dcs = sorted(set(dc_nodes)) if dc_nodes is not None else cands
        return [
            Placement(family, DcNfv(frozenset(sub)), dc=v, x=x)
            for sub in itertools.combinations(cands, x)
            for v in dcs
        ]
    if family == "mb":
        if not chain:
            raise HarnessError("mb placements need the service chain")
        return [Placement(family, MB.of(seg)) for seg in mb_segmentations(chain, cands)]
    raise HarnessError(f"unknown strategy family {family!r}; expected one of {FAMILIES}")


# --------------------------------------------------------------------------
# records

@dataclass(frozen=True)
class SweepRecord:
    strategy: str
    placement: str
    theta: float
    traffic_gbps: float
    upsilon_gb: float
    status: str
    omega: Optional[float] = None
    omega_norm: Optional[float] = None
    max_link_load_gbps: Optional[float] = None
    wall_ms: float = 0.0
    feasible_count: Optional[int] = None
    member_count: Optional[int] = None

    @property
    def is_aggregate(self) -> bool:
        return self.member_count is not None


def _num(x: Optional[float]) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf"
    return repr(round(float(x), 9))


def records_to_csv(records: Iterable[SweepRecord], *, timing: bool = True) -> str:
    """CSV text; with ``timing=False`` the wall_ms column is written as 0 so output is byte-stable."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        w.writerow([
            r.strategy, r.placement, _num(r.theta), _num(r.traffic_gbps), _num(r.upsilon_gb),
            r.status, _num(r.omega), _num(r.omega_norm), _num(r.max_link_load_gbps),
            f"{r.wall_ms:.1f}" if timing else "0",
        ])
    return buf.getvalue()


def write_csv(records: Iterable[SweepRecord], path: str | Path, *, timing: bool = True) -> None:
    Path(path).write_text(records_to_csv(records, timing=timing), encoding="utf-8")


# --------------------------------------------------------------------------
# sweeps

@dataclass(frozen=True)
class _Job:
    order: tuple
    scenario: Scenario
    placement: Placement
    theta: float
    traffic: float
    k: int
    config: SolverConfig


def _run_job(job: _Job) -> SweepRecord:
    p = job.placement
    sc = p.apply(job.scenario)
    label = p.encode(job.scenario)
    ups = sc.budget.mem_per_nfv_node
    t0 = time.perf_counter()
    try:
        ps = build_path_set(sc.topology, p.strategy.effective_roles(sc), sc.demands, job.k)
        model = compile_model(sc, p.strategy, ps)
        res = solve(model, job.config)
    except (ModelError, PathSetError, ScenarioError) as exc:
        return SweepRecord(p.strategy_id, label, job.theta, job.traffic, ups, f"error: {exc}")
    wall = (time.perf_counter() - t0) * 1000.0
    peak = link_loads(res.solution, sc.topology).max_load if res.solution else None
    return SweepRecord(
        p.strategy_id, label, job.theta, job.traffic, ups, res.status, res.objective, None, peak, wall
    )


def _execute(jobs: list[_Job], workers: int) -> list[SweepRecord]:
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_job, jobs))
    return [_run_job(j) for j in jobs]


def _aggregate(rows: list[SweepRecord]) -> SweepRecord:
    """Mean over members with an incumbent; infeasible when none has one."""
    first = rows[0]
    good = [r.omega for r in rows if r.omega is not None]
    peaks = [r.max_link_load_gbps for r in rows if r.max_link_load_gbps is not None]
    if good:
        status = OPTIMAL if all(r.status in (OPTIMAL, INFEASIBLE) for r in rows) else TIMEOUT
    else:
        status = TIMEOUT if any(r.status == TIMEOUT for r in rows) else INFEASIBLE
    return SweepRecord(
        first.strategy,
        f"mean;feasible={len(good)}/{len(rows)}",
        first.theta, first.traffic_gbps, first.upsilon_gb, status,
        sum(good) / len(good) if good else None,
        None,
        max(peaks) if peaks else None,
        sum(r.wall_ms for r in rows),
        len(good), len(rows),
    )


def _normalized(records: list[SweepRecord]) -> list[SweepRecord]:
    base = {
        (r.theta, r.traffic_gbps, r.upsilon_gb): r.omega
        for r in records
        if r.is_aggregate and r.strategy == BASELINE and r.omega
    }
    out = []
    for r in records:
        b = base.get((r.theta, r.traffic_gbps, r.upsilon_gb))
        out.append(replace(r, omega_norm=r.omega / b) if b and r.omega is not None else r)
    return out


@dataclass(frozen=True)
class FamilySpec:
    family: str
    x: Optional[int] = None

    @classmethod
    def parse(cls, text: str) -> FamilySpec:
        """``dc-nfv-3`` style ids carry x as a suffix."""
        if text.startswith("dc-nfv-") and text[7:].isdigit():
            return cls("dc-nfv", int(text[7:]))
        if text not in FAMILIES or text == "dc-nfv":
            raise HarnessError(f"unknown strategy {text!r}")
        return cls(text)


def run_sweep(
    template: Scenario,
    families: Sequence[FamilySpec | str],
    thetas: Sequence[float],
    traffics: Sequence[float],
    k: int = 3,
    config: SolverConfig | None = None,
    *,
    dc_candidates: Optional[Iterable[int]] = None,
    nfv_candidates: Optional[Iterable[int]] = None,
    mb_candidates: Optional[Iterable[int]] = None,
    upsilons: Sequence[float] = (),
    workers: int = 1,
) -> list[SweepRecord]:
    """One record per (strategy, placement, theta, traffic[, upsilon]) plus mean rows.

    Rows come out in input grid order with each family's placements followed by
    its aggregate row. Per-solve failures are recorded, never raised.
    ``upsilons`` defaults to the template's memory budget.
    """
    if not thetas or not traffics:
        raise HarnessError("theta and traffic lists must be non-empty")
    if k < 1:
        raise HarnessError("k must be >= 1")
    config = config or SolverConfig()
    specs = [FamilySpec.parse(f) if isinstance(f, str) else f for f in families]
    nodes = template.topology.nodes
    dcs = sorted(dc_candidates) if dc_candidates is not None else list(nodes)
    nfv = sorted(nfv_candidates) if nfv_candidates is not None else sorted(template.roles.nfv_nodes)
    mbs = sorted(mb_candidates) if mb_candidates is not None else nfv
    ups_list = list(upsilons) or [template.budget.mem_per_nfv_node]

    groups: list[list[_Job]] = []
    for traffic in traffics:
        scaled = template.scaled_traffic(traffic)
        for theta in thetas:
            for ups in ups_list:
                sc = scaled.with_budget(cores_per_nfv_node=float(theta), mem_per_nfv_node=float(ups))
                for spec in specs:
                    cands = {"dc-only": dcs, "dc-nfv-all": dcs, "nfv-all": nodes, "mb": mbs}.get(spec.family, nfv)
                    places = enumerate_placements(
                        spec.family, cands, spec.x, dc_nodes=dcs, chain=template.chain.functions
                    )
                    groups.append([
                        _Job((traffic, theta, ups, spec, i), sc, p, float(theta), float(traffic), k, config)
                        for i, p in enumerate(places)
                    ])
    flat = [j for g in groups for j in g]
    results = iter(_execute(flat, workers))
    records: list[SweepRecord] = []
    for g in groups:
        rows = [next(results) for _ in g]
        records.extend(rows)
        if rows:
            records.append(_aggregate(rows))
    return _normalized(records)


def memory_sweep(
    template: Scenario,
    upsilons: Sequence[float],
    traffics: Sequence[float],
    mode: str,
    k: int = 3,
    config: SolverConfig | None = None,
    *,
    dc_candidates: Optional[Iterable[int]] = None,
    workers: int = 1,
) -> list[SweepRecord]:
    """DC plus every NFV candidate, cores unlimited, memory rows of ``mode`` enforced."""
    if mode not in ("non_scaling", "scaling"):
        raise HarnessError(f"memory mode must be non_scaling or scaling, got {mode!r}")
    x = len(template.roles.nfv_nodes)
    sc = template.with_budget(cores_per_nfv_node=math.inf, memory_mode=mode)
    return run_sweep(
        sc, [FamilySpec("dc-nfv", x)], [math.inf], traffics, k, config,
        dc_candidates=dc_candidates, upsilons=upsilons, workers=workers,
    )
