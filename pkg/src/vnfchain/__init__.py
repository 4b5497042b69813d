"""Joint VNF service-chain placement and routing as a 0-1 ILP."""

from .ilp_model import (
    MB,
    DcNfv,
    DcNfvAll,
    DcOnly,
    IlpModel,
    NfvAll,
    PlacementSolution,
    Strategy,
    compile_model,
    decode_solution,
    export_lp,
)
from .analysis import congestion_sweep, inflection_point, link_loads, resource_consumption
from .harness import memory_sweep, run_sweep
from .paths import Path, PathSet, build_path_set, k_shortest_paths
from .solver import SolverConfig, SolveResult, brute_force, solve
from .topology import Demand, Scenario, Topology, load_bundled, load_scenario
from .verify import Verdict, verify_solution

__all__ = [
    "MB", "DcNfv", "DcNfvAll", "DcOnly", "IlpModel", "NfvAll", "PlacementSolution",
    "Strategy", "compile_model", "decode_solution", "export_lp", "Path", "PathSet",
    "build_path_set", "k_shortest_paths", "Demand", "Scenario", "Topology",
    "load_bundled", "load_scenario", "Verdict", "verify_solution", "SolverConfig",
    "SolveResult", "brute_force", "solve", "congestion_sweep", "inflection_point",
    "link_loads", "resource_consumption", "memory_sweep", "run_sweep",
]
