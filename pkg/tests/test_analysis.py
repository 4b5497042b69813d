from __future__ import annotations

import math

import pytest

from conftest import line_scenario, model_for
from vnfchain.analysis import (
    ABOVE_BOUND,
    AT_BOUND,
    FEASIBLE,
    UNKNOWN,
    AnalysisError,
    CongestionReport,
    congestion_sweep,
    dc_intake_exceeded,
    inflection_point,
    link_loads,
    normalize,
    resource_consumption,
    rho_exceeds_omega,
    solve_scenario,
)
from vnfchain.generators import random_instance
from vnfchain.ilp_model import DcNfv, DcNfvAll, DcOnly, PlacementSolution
from vnfchain.paths import Path
from vnfchain.solver import INFEASIBLE, OPTIMAL, SolverConfig, solve
from vnfchain.topology import Demand, Topology


def test_resource_consumption_line():
    sc = line_scenario()
    res = solve(model_for(sc, DcNfv(frozenset({2})), 1))
    assert resource_consumption(res.solution) == 2


def test_resource_consumption_arithmetic():
    demands = (Demand(1, 3, 8.0), Demand(1, 4, 12.0))
    sol = PlacementSolution(demands, (Path((1, 2, 3)), Path((1, 2, 3, 4))), ((), ()), 52.0)
    assert resource_consumption(sol) == 52


def test_link_loads_line():
    sc = line_scenario()
    res = solve(model_for(sc, DcNfv(frozenset({2})), 1))
    prof = link_loads(res.solution, sc.topology)
    assert prof.loads == {(1, 2): 1.0, (2, 1): 0.0, (2, 3): 1.0, (3, 2): 0.0}
    assert prof.max_load == 1.0 and prof.mean_load == 0.5
    assert prof.total == resource_consumption(res.solution)


@pytest.mark.parametrize("seed", range(40))
def test_identities_on_random_instances(seed):
    inst = random_instance(seed)
    res = solve(model_for(inst.scenario, inst.strategy, inst.k))
    if res.solution is None:
        return
    prof = link_loads(res.solution, inst.scenario.topology)
    assert resource_consumption(res.solution) == pytest.approx(res.objective, abs=1e-9)
    assert prof.total == pytest.approx(res.objective, abs=1e-9)
    for arc, load in prof.loads.items():
        assert load <= inst.scenario.topology.arcs[arc] + 1e-9


def test_dc_incident_arcs_carry_every_demand(nsfnet):
    sc = nsfnet.with_dc(3)
    _, res = solve_scenario(sc, DcOnly(), 5)
    prof = link_loads(res.solution, sc.topology)
    into = sum(load for (i, j), load in prof.loads.items() if j == 3)
    out = sum(load for (i, j), load in prof.loads.items() if i == 3)
    passing = sum(d.flow for d, p in zip(res.solution.demands, res.solution.paths) if 3 in p.nodes[1:-1])
    assert passing == pytest.approx(sum(d.flow for d in sc.demands))
    assert into == pytest.approx(passing) and out == pytest.approx(passing)


def test_normalize():
    assert normalize({"A": 10, "B": 20}, "A") == {"A": 1.0, "B": 2.0}
    out = normalize({"x": 3.3, "y": 7.1}, "x")
    assert out["x"] == 1.0
    with pytest.raises(AnalysisError):
        normalize({"A": 1}, "B")
    with pytest.raises(AnalysisError):
        normalize({"A": 0.0, "B": 1.0}, "A")


@pytest.mark.parametrize("traffic", [7.5, 10.0, 12.5])
def test_intake_necessary_condition(nsfnet, traffic):
    sc = nsfnet.scaled_traffic(traffic)
    endpoints = {v for d in sc.demands for v in d.pair}
    for v in sc.topology.nodes:
        if dc_intake_exceeded(sc, v) or (v not in endpoints and rho_exceeds_omega(sc, v)):
            _, res = solve_scenario(sc.with_dc(v), DcOnly(), 5)
            assert res.status == INFEASIBLE


def test_rho_shortcut_is_not_exact_at_endpoints(nsfnet):
    # node 2 is an endpoint: rho exceeds its intake yet its own flows never enter it
    sc = nsfnet.scaled_traffic(7.5)
    assert rho_exceeds_omega(sc, 2) and not dc_intake_exceeded(sc, 2)


def test_congestion_report_logic():
    status = {
        (1.0, 1): FEASIBLE, (1.0, 2): FEASIBLE,
        (2.0, 1): INFEASIBLE, (2.0, 2): UNKNOWN,
        (3.0, 1): FEASIBLE, (3.0, 2): INFEASIBLE,
        (4.0, 1): INFEASIBLE, (4.0, 2): INFEASIBLE,
    }
    rep = CongestionReport((1.0, 2.0, 3.0, 4.0), (1, 2), status)
    assert rep.infeasible_sets[2.0] == {1}
    assert rep.newly_infeasible == {1.0: set(), 2.0: {1}, 3.0: {2}, 4.0: set()}
    assert rep.congestion_point == 4.0
    assert rep.monotonicity_violations == [(3.0, 1)]
    assert rep.infeasible_node_count == {1.0: 0, 2.0: 1, 3.0: 1, 4.0: 2}


def test_congestion_sweep_small(nsfnet):
    rep = congestion_sweep(nsfnet, [7.5, 15], [3, 4], k=5)
    assert rep.infeasible_at(7.5) == {4}
    assert rep.infeasible_at(15) == {3, 4}
    assert rep.congestion_point == 15
    assert not rep.monotonicity_violations


def test_congestion_timeouts_become_unknown(nsfnet):
    rep = congestion_sweep(nsfnet, [1.0], [1], k=5, config=SolverConfig(node_limit=0))
    assert rep.status[(1.0, 1)] in (UNKNOWN, FEASIBLE, INFEASIBLE)
    if rep.status[(1.0, 1)] == UNKNOWN:
        assert rep.warnings and rep.congestion_point is None


def test_congestion_sweep_rejects_unsorted(nsfnet):
    with pytest.raises(AnalysisError):
        congestion_sweep(nsfnet, [10, 7.5], [1])


def _single_demand_toy():
    from vnfchain.topology import NodeRoles, ResourceBudget, Scenario, ServiceChain, VnfSpec

    # shortest path 1-2-3; the DC hangs off node 2 and is never on a candidate
    topo = Topology((1, 2, 3, 4), ((1, 2, 10.0), (2, 3, 10.0), (2, 4, 10.0)))
    return Scenario(
        topo, NodeRoles(frozenset({4}), frozenset()), (Demand(1, 3, 2.0),),
        (VnfSpec("A", 1.5),), ServiceChain(("A",)), ResourceBudget(),
    )


def test_inflection_closed_form():
    sc = _single_demand_toy()
    grid = [1, 2, 3, 4, 5, 8]
    need = 2.0 * 1.5
    rep = inflection_point(sc, DcNfvAll(), grid, k=1)
    assert rep.theta == min(t for t in grid if t >= need)
    assert rep.points[2.0] == INFEASIBLE and rep.points[3.0] == AT_BOUND


def test_inflection_none_in_range():
    sc = _single_demand_toy()
    rep = inflection_point(sc, DcNfvAll(), [0.5, 1.0], k=1)
    assert rep.theta is None and not rep.found
    assert rep.infeasible == [0.5, 1.0]


def test_inflection_above_bound(nsfnet):
    sc = nsfnet.scaled_traffic(1).with_dc(5)
    rep = inflection_point(sc, DcNfvAll(), [4, 8], k=3)
    assert rep.points == {4.0: ABOVE_BOUND, 8.0: AT_BOUND}
    assert rep.theta == 8.0
    assert rep.objectives[4.0] > rep.bound


def test_strategy_ordering_nested_sets(nsfnet):
    sc = nsfnet.scaled_traffic(1).with_dc(5).with_budget(cores_per_nfv_node=192.0)
    values = []
    for strat in (DcNfvAll(), DcNfv(frozenset({3, 8, 10})), DcNfv(frozenset({3, 8})), DcOnly()):
        _, res = solve_scenario(sc, strat, 5)
        values.append(res.objective if res.status == OPTIMAL else math.inf)
    assert values == sorted(values)
