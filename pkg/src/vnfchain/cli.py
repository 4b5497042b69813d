"""Command-line entry point: ``vnfchain <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

from .analysis import build_model, congestion_sweep, inflection_point, link_loads
from .generators import random_instance
from .harness import FAMILIES, FamilySpec, HarnessError, memory_sweep, records_to_csv, run_sweep
from .ilp_model import MB, DcNfv, DcNfvAll, DcOnly, ModelError, NfvAll, Strategy, export_lp
from .paths import PathSetError
from .solver import INFEASIBLE, OPTIMAL, TIMEOUT, SolverConfig, solve
from .topology import (
    Scenario,
    ScenarioError,
    bundled_path,
    load_scenario,
    nsfnet_consistency,
    validate,
)
from .verify import verify_solution

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2
EXIT_TIMEOUT = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated node ids, got {text!r}") from None


def _budget(text: str) -> float:
    return math.inf if text.lower() in ("inf", "none", "unlimited") else float(text)


def _limit(text: str) -> Optional[float]:
    return None if text.lower() in ("inf", "none", "unlimited") else float(text)


def _parser() -> _Parser:
    p = _Parser(prog="vnfchain", description="Service-chain placement ILP toolkit.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp: argparse.ArgumentParser, scenario_required: bool = True) -> None:
        sp.add_argument("--scenario", required=scenario_required, help="scenario JSON (path or bundled name)")
        sp.add_argument("--k", type=int, default=5, help="candidate paths per demand")
        sp.add_argument(
            "--timeout-s", type=_limit, default=120.0, help="per-solve time limit in seconds, or none (default 120)"
        )
        sp.add_argument("--out", default=None, help="output file")

    s = sub.add_parser("solve", help="solve one instance")
    common(s, scenario_required=False)
    s.add_argument("--strategy", choices=FAMILIES, default=None)
    s.add_argument("--nfv-nodes", type=_ints, default=None)
    s.add_argument("--dc", type=int, default=None)
    s.add_argument("--theta", type=_budget, default=None)
    s.add_argument("--traffic", type=float, default=None, help="average flow per demand, Gbps")
    s.add_argument("--memory-mode", choices=("off", "non_scaling", "scaling"), default=None)
    s.add_argument("--upsilon", type=_budget, default=None)
    s.add_argument("--seed", type=int, default=None, help="solve a small generated instance instead")

    w = sub.add_parser("sweep", help="strategy x theta x traffic grid to CSV")
    common(w)
    w.add_argument("--strategy", action="append", required=True,
                   help="family id; dc-nfv takes --x or a dc-nfv-<x> id; repeatable")
    w.add_argument("--x", type=_ints, default=None, help="NFV subset sizes for dc-nfv")
    w.add_argument("--nfv-nodes", type=_ints, default=None, help="NFV candidates (default: scenario)")
    w.add_argument("--dc", type=_ints, default=None, help="DC candidates (default: all nodes)")
    w.add_argument("--theta", type=_floats, required=True)
    w.add_argument("--traffic", type=_floats, required=True)
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--no-timing", action="store_true", help="write wall_ms as 0 for byte-stable output")

    c = sub.add_parser("congestion", help="DC-only feasibility per DC node and traffic")
    common(c)
    c.add_argument("--traffic", type=_floats, required=True)
    c.add_argument("--dc", type=_ints, default=None, help="candidate DC nodes (default: all)")

    m = sub.add_parser("memory-sweep", help="DC plus all NFV nodes under memory budgets")
    common(m)
    m.add_argument("--memory-mode", choices=("non_scaling", "scaling"), required=True)
    m.add_argument("--upsilon", type=_floats, required=True)
    m.add_argument("--traffic", type=_floats, required=True)
    m.add_argument("--dc", type=_ints, default=None)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--no-timing", action="store_true")

    f = sub.add_parser("inflection", help="smallest theta reaching the shortest-path bound")
    common(f)
    f.add_argument("--strategy", choices=FAMILIES, default="dc-nfv-all")
    f.add_argument("--nfv-nodes", type=_ints, default=None)
    f.add_argument("--dc", type=int, default=None)
    f.add_argument("--theta", type=_floats, required=True)
    f.add_argument("--traffic", type=float, default=None)

    e = sub.add_parser("export-lp", help="write the model in CPLEX LP format")
    common(e)
    e.add_argument("--strategy", choices=FAMILIES, default="dc-only")
    e.add_argument("--nfv-nodes", type=_ints, default=None)
    e.add_argument("--dc", type=int, default=None)
    e.add_argument("--theta", type=_budget, default=None)
    e.add_argument("--traffic", type=float, default=None)
    e.add_argument("--memory-mode", choices=("off", "non_scaling", "scaling"), default=None)
    e.add_argument("--upsilon", type=_budget, default=None)

    v = sub.add_parser("validate", help="lint a scenario and print topology checks")
    v.add_argument("--scenario", required=True)
    v.add_argument("--strict", action="store_true", help="exit 1 when a consistency check fails")
    return p


# --------------------------------------------------------------------------
# helpers

def _load(name: str, *, templates: bool = False) -> Scenario:
    path = Path(name)
    if not path.exists():
        bundled = bundled_path(name)
        if not bundled.exists():
            raise UsageError(f"--scenario: no such file {name!r}")
        path = bundled
    return load_scenario(path, allow_empty_demands=templates)


def _configure(sc: Scenario, args: argparse.Namespace) -> Scenario:
    if getattr(args, "traffic", None) is not None and not isinstance(args.traffic, list):
        sc = sc.scaled_traffic(args.traffic)
    changes = {}
    if getattr(args, "theta", None) is not None and not isinstance(args.theta, list):
        changes["cores_per_nfv_node"] = args.theta
    if getattr(args, "upsilon", None) is not None and not isinstance(args.upsilon, list):
        changes["mem_per_nfv_node"] = args.upsilon
    if getattr(args, "memory_mode", None) is not None:
        changes["memory_mode"] = args.memory_mode
    if changes:
        sc = sc.with_budget(**changes)
    if getattr(args, "dc", None) is not None and not isinstance(args.dc, list):
        sc = sc.with_dc(args.dc)
    return sc


def _strategy(sc: Scenario, family: str, nfv: Optional[Sequence[int]]) -> Strategy:
    if family == "dc-only":
        return DcOnly()
    if family == "dc-nfv":
        return DcNfv(frozenset(nfv if nfv is not None else sc.roles.nfv_nodes))
    if family == "dc-nfv-all":
        return DcNfvAll()
    if family == "nfv-all":
        return NfvAll()
    if not sc.roles.mb_locations:
        raise UsageError("--strategy mb: scenario has no mb_locations")
    return MB.of(sc.roles.mb_locations)


def _config(args: argparse.Namespace) -> SolverConfig:
    return SolverConfig(time_limit=args.timeout_s)


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --------------------------------------------------------------------------
# subcommands

def _cmd_solve(args: argparse.Namespace) -> int:
    if args.seed is not None:
        inst = random_instance(args.seed)
        sc, strategy, k = inst.scenario, inst.strategy, inst.k
    else:
        if not args.scenario:
            raise UsageError("--scenario is required unless --seed is given")
        sc = _configure(_load(args.scenario), args)
        strategy = _strategy(sc, args.strategy or "dc-only", args.nfv_nodes)
        k = args.k
    model = build_model(sc, strategy, k)
    res = solve(model, _config(args))
    doc: dict = {"status": res.status, "objective": res.objective, "nodes": res.stats.nodes}
    if res.solution is not None:
        sol = res.solution
        doc["max_link_load_gbps"] = link_loads(sol, sc.topology).max_load
        doc["verified"] = verify_solution(sc, strategy, sol).ok
        doc["demands"] = [
            {"s": d.source, "d": d.dest, "gbps": d.flow, "path": list(p.nodes),
             "placement": [[f, v] for f, v in pl]}
            for d, p, pl in zip(sol.demands, sol.paths, sol.placements)
        ]
    print(f"status={res.status} objective={res.objective}")
    if args.out:
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return {OPTIMAL: EXIT_OK, INFEASIBLE: EXIT_INFEASIBLE, TIMEOUT: EXIT_TIMEOUT}[res.status]


def _families(args: argparse.Namespace) -> list[FamilySpec]:
    specs = []
    for item in args.strategy:
        for name in item.split(","):
            if name == "dc-nfv":
                if not args.x:
                    raise UsageError("--strategy dc-nfv needs --x")
                specs.extend(FamilySpec("dc-nfv", x) for x in args.x)
            else:
                try:
                    specs.append(FamilySpec.parse(name))
                except HarnessError as exc:
                    raise UsageError(f"--strategy: {exc}") from None
    return specs


def _cmd_sweep(args: argparse.Namespace) -> int:
    sc = _load(args.scenario)
    recs = run_sweep(
        sc, _families(args), args.theta, args.traffic, args.k, _config(args),
        dc_candidates=args.dc, nfv_candidates=args.nfv_nodes, workers=args.workers,
    )
    _emit(records_to_csv(recs, timing=not args.no_timing), args.out)
    return EXIT_OK


def _cmd_memory(args: argparse.Namespace) -> int:
    sc = _load(args.scenario)
    recs = memory_sweep(
        sc, args.upsilon, args.traffic, args.memory_mode, args.k, _config(args),
        dc_candidates=args.dc, workers=args.workers,
    )
    _emit(records_to_csv(recs, timing=not args.no_timing), args.out)
    return EXIT_OK


def _cmd_congestion(args: argparse.Namespace) -> int:
    sc = _load(args.scenario)
    nodes = args.dc if args.dc is not None else sc.topology.nodes
    rep = congestion_sweep(sc, args.traffic, nodes, args.k, _config(args))
    lines = ["traffic_gbps,dc,status"]
    for t in rep.traffics:
        for v in rep.candidates:
            lines.append(f"{t:g},{v},{rep.status[(t, v)]}")
    _emit("\n".join(lines) + "\n", args.out)
    for t, new in rep.newly_infeasible.items():
        print(f"# traffic {t:g}: newly infeasible {sorted(new)}", file=sys.stderr)
    cp = rep.congestion_point
    print(f"# congestion point: {cp:g}" if cp is not None else "# congestion point: none in range",
          file=sys.stderr)
    for msg in rep.warnings:
        print(f"# warning: {msg}", file=sys.stderr)
    return EXIT_OK


def _cmd_inflection(args: argparse.Namespace) -> int:
    sc = _configure(_load(args.scenario), args)
    strategy = _strategy(sc, args.strategy, args.nfv_nodes)
    rep = inflection_point(sc, strategy, args.theta, args.k, _config(args))
    lines = ["theta,point"] + [f"{t:g},{st}" for t, st in rep.points.items()]
    _emit("\n".join(lines) + "\n", args.out)
    print(f"# shortest-path bound: {rep.bound:g}", file=sys.stderr)
    print(f"# inflection: {rep.theta:g}" if rep.found else "# inflection: none in range", file=sys.stderr)
    return EXIT_OK


def _cmd_export(args: argparse.Namespace) -> int:
    if not args.out:
        raise UsageError("--out is required for export-lp")
    sc = _configure(_load(args.scenario), args)
    export_lp(build_model(sc, _strategy(sc, args.strategy, args.nfv_nodes), args.k), args.out)
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    sc = _load(args.scenario, templates=True)
    validate(sc, require_demands=False)
    topo = sc.topology
    print(f"ok: {len(topo.nodes)} nodes, {len(topo.links)} links, {len(sc.demands)} demands")
    degrees = " ".join(f"{v}:{topo.degree(v)}" for v in topo.nodes)
    print(f"degrees: {degrees}")
    failed = False
    if len(topo.nodes) == 14 and sc.demands:
        for name, passed, detail in nsfnet_consistency(sc):
            failed |= not passed
            print(f"{'PASS' if passed else 'FAIL'} {name} ({detail})")
    return EXIT_USAGE if failed and args.strict else EXIT_OK


_COMMANDS = {
    "solve": _cmd_solve,
    "sweep": _cmd_sweep,
    "congestion": _cmd_congestion,
    "memory-sweep": _cmd_memory,
    "inflection": _cmd_inflection,
    "export-lp": _cmd_export,
    "validate": _cmd_validate,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioError, ModelError, PathSetError, HarnessError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
