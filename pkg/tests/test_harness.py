from __future__ import annotations

import math

import pytest

from vnfchain.analysis import build_model
from vnfchain.harness import (
    CSV_COLUMNS,
    FamilySpec,
    HarnessError,
    Placement,
    SweepRecord,
    enumerate_placements,
    mb_segmentations,
    memory_sweep,
    records_to_csv,
    run_sweep,
)
from vnfchain.ilp_model import MB, DcNfv
from vnfchain.solver import OPTIMAL, SolverConfig, solve
from vnfchain.verify import verify_solution

CHAIN = ("NAT", "TS", "AO", "IPsec", "WANA")


def test_dc_nfv_subsets():
    configs = enumerate_placements("dc-nfv", [3, 5, 8, 10], 2, dc_nodes=[1])
    assert len(configs) == 6
    assert {c.strategy.nfv for c in configs} == {frozenset(p) for p in [(3, 5), (3, 8), (3, 10), (5, 8), (5, 10), (8, 10)]}


def test_dc_nfv_crossed_with_dcs():
    assert len(enumerate_placements("dc-nfv", [3, 5, 8, 10], 2, dc_nodes=range(1, 15))) == 6 * 14


def test_dc_only_fourteen(nsfnet):
    assert len(enumerate_placements("dc-only", nsfnet.topology.nodes)) == 14


def test_mb_needs_two_nodes():
    configs = enumerate_placements("mb", [3, 5, 8, 10], chain=CHAIN)
    assert configs and all(len(c.strategy.placements) >= 2 for c in configs)
    assert all(len(fs) <= 3 for c in configs for _, fs in c.strategy.placements)
    assert len(configs) == 264


def test_mb_blocks_are_contiguous():
    for seg in mb_segmentations(CHAIN, [1, 2, 3]):
        order = sorted(seg.items(), key=lambda kv: CHAIN.index(kv[1][0]))
        assert tuple(f for _, fs in order for f in fs) == CHAIN


def test_mb_small_count():
    # chain of 3 over 2 nodes: one block (2 ways) or a 1+2 / 2+1 split (2 x 2 ways)
    assert len(mb_segmentations(("A", "B", "C"), [1, 2])) == 2 + 4


def test_x_too_large():
    with pytest.raises(HarnessError):
        enumerate_placements("dc-nfv", [3, 5], 3)
    with pytest.raises(HarnessError):
        enumerate_placements("bogus", [1])


def test_placement_encoding(nsfnet):
    p = Placement("dc-nfv", DcNfv(frozenset({3, 5, 8})), dc=5, x=3)
    assert p.encode(nsfnet) == "dc=5;nfv=3,8"
    assert p.strategy_id == "dc-nfv-3"
    mb = Placement("mb", MB.of({3: ("NAT", "TS"), 8: ("AO", "IPsec", "WANA")}))
    assert mb.encode(nsfnet) == "mb=3:NAT|TS,8:AO|IPsec|WANA"


def test_family_parse():
    assert FamilySpec.parse("dc-nfv-3") == FamilySpec("dc-nfv", 3)
    assert FamilySpec.parse("mb") == FamilySpec("mb")
    with pytest.raises(HarnessError):
        FamilySpec.parse("dc-nfv")


@pytest.fixture(scope="module")
def small_sweep(nsfnet):
    return run_sweep(nsfnet, ["dc-only", "dc-nfv-all"], [192], [1], k=5, dc_candidates=[3, 5, 9])


def test_sweep_shape_and_aggregates(small_sweep):
    rows = [r for r in small_sweep if not r.is_aggregate]
    aggs = [r for r in small_sweep if r.is_aggregate]
    assert len(rows) == 6 and len(aggs) == 2
    for agg in aggs:
        members = [r.omega for r in rows if r.strategy == agg.strategy and r.omega is not None]
        assert agg.omega == pytest.approx(sum(members) / len(members), abs=1e-9)
        assert agg.placement == f"mean;feasible={len(members)}/3"
    by = {a.strategy: a.omega for a in aggs}
    assert by["dc-nfv-all"] <= by["dc-only"]
    assert [a for a in aggs if a.strategy == "dc-nfv-all"][0].omega_norm == 1.0


def test_sweep_optimal_rows_verify(nsfnet, small_sweep):
    sc = nsfnet.scaled_traffic(1).with_budget(cores_per_nfv_node=192.0)
    for spec, p in (("dc-only", enumerate_placements("dc-only", [3, 5, 9])),):
        for pl in p:
            scen = pl.apply(sc)
            res = solve(build_model(scen, pl.strategy, 5))
            row = [r for r in small_sweep if r.strategy == spec and r.placement == pl.encode(sc)][0]
            assert row.status == res.status
            if res.status == OPTIMAL:
                assert verify_solution(scen, pl.strategy, res.solution).ok
                assert row.omega == pytest.approx(res.objective)


def test_sweep_csv_header_and_stability(nsfnet, small_sweep):
    text = records_to_csv(small_sweep, timing=False)
    assert text.splitlines()[0] == ",".join(CSV_COLUMNS)
    again = run_sweep(nsfnet, ["dc-only", "dc-nfv-all"], [192], [1], k=5, dc_candidates=[3, 5, 9])
    assert records_to_csv(again, timing=False) == text


def test_sweep_records_errors_without_aborting(nsfnet):
    recs = run_sweep(nsfnet, ["dc-only"], [192], [1], k=5, dc_candidates=[3],
                     config=SolverConfig(node_limit=0))
    assert recs[0].status in ("timeout", "optimal", "infeasible")
    assert recs[-1].is_aggregate


def test_sweep_validates_grid(nsfnet):
    with pytest.raises(HarnessError):
        run_sweep(nsfnet, ["dc-only"], [], [1])
    with pytest.raises(HarnessError):
        run_sweep(nsfnet, ["dc-only"], [2], [1], k=0)


def test_aggregate_status_all_infeasible():
    from vnfchain.harness import _aggregate

    rows = [SweepRecord("dc-only", f"dc={i};nfv=", 2.0, 1.0, math.inf, "infeasible") for i in (1, 2)]
    agg = _aggregate(rows)
    assert agg.status == "infeasible" and agg.omega is None and agg.placement == "mean;feasible=0/2"


def test_memory_sweep_modes(nsfnet):
    recs = memory_sweep(nsfnet, [1000.0], [1], "scaling", k=3, dc_candidates=[5])
    assert all(math.isinf(r.theta) for r in recs)
    assert recs[0].strategy == "dc-nfv-4"
    with pytest.raises(HarnessError):
        memory_sweep(nsfnet, [8], [1], "off")


def test_memory_sweep_large_upsilon_hits_bound(nsfnet):
    # with plentiful memory scaling rows never bind
    sc = nsfnet.scaled_traffic(1).with_dc(5).with_budget(cores_per_nfv_node=math.inf)
    free = solve(build_model(sc, DcNfv(frozenset({3, 5, 8, 10})), 3))
    recs = memory_sweep(nsfnet, [10_000.0], [1], "scaling", k=3, dc_candidates=[5])
    assert recs[0].omega == pytest.approx(free.objective)


def test_memory_sweep_scaling_nonincreasing(nsfnet):
    recs = memory_sweep(nsfnet, [4, 8, 16, 64], [2], "scaling", k=3, dc_candidates=[5])
    vals = [r.omega if r.omega is not None else math.inf for r in recs if not r.is_aggregate]
    assert all(b <= a + 1e-9 for a, b in zip(vals, vals[1:]))


def test_worker_pool_matches_serial(nsfnet, small_sweep):
    pooled = run_sweep(nsfnet, ["dc-only", "dc-nfv-all"], [192], [1], k=5, dc_candidates=[3, 5, 9], workers=2)
    assert records_to_csv(pooled, timing=False) == records_to_csv(small_sweep, timing=False)
