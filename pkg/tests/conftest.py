from __future__ import annotations

import math

import pytest

from vnfchain.ilp_model import compile_model
from vnfchain.paths import build_path_set
from vnfchain.topology import (
    Demand,
    NodeRoles,
    ResourceBudget,
    Scenario,
    ServiceChain,
    Topology,
    VnfSpec,
    load_bundled,
)


def line_scenario(
    *,
    nfv=(2,),
    dc=(),
    flow: float = 1.0,
    cores: float = 1.0,
    theta: float = math.inf,
    capacity: float = 40.0,
    chain=("A",),
) -> Scenario:
    """Line graph 1-2-3 with one demand 1 -> 3."""
    topo = Topology((1, 2, 3), ((1, 2, capacity), (2, 3, capacity)))
    catalog = tuple(VnfSpec(f, cores, 1.0, 0.5) for f in chain)
    return Scenario(
        topo,
        NodeRoles(frozenset(dc), frozenset(nfv)),
        (Demand(1, 3, flow),),
        catalog,
        ServiceChain(tuple(chain)),
        ResourceBudget(cores_per_nfv_node=theta),
    )


def model_for(scenario: Scenario, strategy, k: int):
    ps = build_path_set(scenario.topology, strategy.effective_roles(scenario), scenario.demands, k)
    return compile_model(scenario, strategy, ps)


@pytest.fixture(scope="session")
def nsfnet() -> Scenario:
    return load_bundled("nsfnet_sc1.json")


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
