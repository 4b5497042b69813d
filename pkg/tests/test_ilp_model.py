from __future__ import annotations

import itertools
import math

import pytest

from conftest import line_scenario, model_for
from vnfchain.generators import random_instance
from vnfchain.ilp_model import (
    MB,
    DcNfv,
    DcOnly,
    InfeasibleAssignmentError,
    ModelError,
    NfvAll,
    compile_model,
    decode_solution,
    export_lp,
    lp_text,
    var_name,
)
from vnfchain.paths import build_path_set
from vnfchain.solver import solve


def _line_model(**kw):
    sc = line_scenario(**kw)
    return model_for(sc, DcNfv(frozenset(sc.roles.nfv_nodes)), 1)


def test_line_model_shape():
    m = _line_model(theta=4)
    assert m.var_counts() == {"r": 1, "l": 1, "q": 1}
    fam = m.family_counts()
    assert fam["eq2"] == 1 and fam["eq3"] == 4 and fam["eq4"] == 1
    assert fam["eq14"] == fam["eq15"] == fam["eq16"] == 1 and fam["eq8"] == 1
    assert solve(m).objective == 2


def test_line_model_with_dc_has_no_core_row():
    sc = line_scenario(nfv=(), dc=(2,), theta=4)
    m = model_for(sc, DcOnly(), 1)
    assert "eq4" not in m.family_counts()
    assert solve(m).objective == 2


def test_objective_uses_only_r():
    m = _line_model()
    assert all(m.variables[i][0] == "r" for i, _ in m.objective)
    for c in m.constraints:
        assert all(0 <= i < len(m.variables) for i, _ in c.terms)


def test_nsfnet_variable_counts_recounted(nsfnet):
    strat = DcNfv(frozenset({3, 5, 8, 10}))
    sc = nsfnet.with_dc(1)
    roles = strat.effective_roles(sc)
    ps = build_path_set(sc.topology, roles, sc.demands, 5)
    m = compile_model(sc, strat, ps)
    chain = sc.chain.functions
    hosting = roles.dc_nodes | roles.nfv_nodes
    n_r = sum(len(c) for c in ps.paths)
    n_l = sum(len({v for p in c for v in p.nodes if v in hosting}) for c in ps.paths) * len(chain)
    n_q = sum(len([v for v in p.nodes if v in hosting]) for c in ps.paths for p in c) * len(chain)
    n_j = 0
    for di, c in enumerate(ps.paths):
        for pi, p in enumerate(c):
            on = [v for v in p.nodes if v in hosting]
            pairs = [(u, v) for a, u in enumerate(on) for v in on[a:] if u in roles.nfv_nodes]
            pairs += [(u, u) for u in on if u in roles.dc_nodes]
            n_j += len(pairs) * (len(chain) - 1)
    assert m.var_counts() == {"r": n_r, "l": n_l, "q": n_q, "j": n_j}


def test_decode_trivial():
    m = _line_model()
    sol = decode_solution(m, {"r_1_3_p0": 1, "l_A_2_1_3": 1, "q_A_2_p0_1_3": 1})
    assert sol.paths[0].nodes == (1, 2, 3)
    assert sol.placements[0] == (("A", 2),)
    assert sol.objective == 2


def test_decode_names_violated_row():
    m = _line_model()
    with pytest.raises(InfeasibleAssignmentError, match=r"Eq\.\(2\) demand \(1,3\)"):
        decode_solution(m, {"r_1_3_p0": 0, "l_A_2_1_3": 0, "q_A_2_p0_1_3": 0})


def test_decode_rejects_incomplete_and_unknown():
    m = _line_model()
    with pytest.raises(InfeasibleAssignmentError):
        decode_solution(m, {"r_1_3_p0": 1})
    with pytest.raises(InfeasibleAssignmentError):
        decode_solution(m, {"r_1_3_p0": 1, "l_A_2_1_3": 1, "q_A_2_p0_1_3": 1, "nope": 1})


def test_dc_only_optimum_paths_contain_dc(nsfnet):
    sc = nsfnet.with_dc(3)
    res = solve(model_for(sc, DcOnly(), 5))
    assert res.status == "optimal"
    assert all(3 in p.nodes for p in res.solution.paths)


def test_mb_must_cover_chain(nsfnet):
    sc = nsfnet
    strat = MB.of({3: ("NAT", "TS"), 5: ("AO",)})
    ps = build_path_set(sc.topology, strat.effective_roles(sc), sc.demands, 2)
    with pytest.raises(ModelError, match="IPsec"):
        compile_model(sc, strat, ps)
    with pytest.raises(ModelError, match="max 3"):
        MB.of({3: ("NAT", "TS", "AO", "IPsec"), 5: ("WANA",)}).check_chain(sc.chain.functions)


def test_path_set_roles_must_match(nsfnet):
    ps = build_path_set(nsfnet.topology, nsfnet.roles, nsfnet.demands, 2)
    with pytest.raises(ModelError):
        compile_model(nsfnet, NfvAll(), ps)


def test_compile_deterministic(nsfnet):
    a = model_for(nsfnet, DcNfv(frozenset({3, 8})), 3)
    b = model_for(nsfnet, DcNfv(frozenset({3, 8})), 3)
    assert a.variables == b.variables and a.constraints == b.constraints


@pytest.mark.parametrize("seed", range(40))
def test_solver_output_linearization_sound(seed):
    inst = random_instance(seed)
    m = model_for(inst.scenario, inst.strategy, inst.k)
    res = solve(m)
    if res.assignment is None:
        return
    val = dict(zip(m.variables, res.assignment))
    assert sum(v for k, v in val.items() if k[0] == "r") == len(inst.scenario.demands)
    for key, v in val.items():
        if key[0] == "q":
            _, f, node, pi, s, d = key
            assert v == (val[("l", f, node, s, d)] and val[("r", s, d, pi)])
        if key[0] == "j":
            _, f1, f2, u, w, pi, s, d = key
            assert v == (val[("q", f1, u, pi, s, d)] and val[("q", f2, w, pi, s, d)])
    loads = 0.0
    for dem, p in zip(m.scenario.demands, res.solution.paths):
        loads += dem.flow * len(p.arcs)
    assert m.objective_value(list(res.assignment)) == pytest.approx(loads, abs=1e-9)


@pytest.mark.parametrize("seed", range(30))
def test_dropping_core_rows_never_hurts(seed):
    inst = random_instance(seed)
    tight = solve(model_for(inst.scenario, inst.strategy, inst.k))
    loose_sc = inst.scenario.with_budget(cores_per_nfv_node=math.inf)
    loose = solve(model_for(loose_sc, inst.strategy, inst.k))
    if tight.status == "optimal":
        assert loose.status == "optimal" and loose.objective <= tight.objective + 1e-9


# -- LP export ---------------------------------------------------------------

def test_lp_objective_line():
    text = lp_text(_line_model())
    assert "obj: 2 r_1_3_p0" in text.splitlines()[2]
    assert text.startswith("\\")
    assert "Subject To" in text and "Binary" in text and text.rstrip().endswith("End")


def test_lp_lists_every_variable(nsfnet):
    m = model_for(nsfnet, DcOnly(), 2)
    text = lp_text(m)
    binary = text.split("Binary\n", 1)[1].split("End", 1)[0].split()
    assert binary == [var_name(k) for k in m.variables]


def test_lp_byte_stable(tmp_path, nsfnet):
    a, b = tmp_path / "a.lp", tmp_path / "b.lp"
    export_lp(model_for(nsfnet, DcOnly(), 3), a)
    export_lp(model_for(nsfnet, DcOnly(), 3), b)
    assert a.read_bytes() == b.read_bytes()
    assert all(len(line) <= 80 for line in a.read_text().splitlines())


@pytest.mark.parametrize("seed", range(12))
def test_lp_round_trip_highs(tmp_path, seed):
    highspy = pytest.importorskip("highspy")
    inst = random_instance(seed)
    m = model_for(inst.scenario, inst.strategy, inst.k)
    path = tmp_path / "m.lp"
    export_lp(m, path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    assert h.getNumCol() == len(m.variables)
    assert h.getNumRow() == len(m.constraints)
    h.run()
    ours = solve(m)
    status = h.getModelStatus()
    if ours.status == "optimal":
        assert status == highspy.HighsModelStatus.kOptimal
        assert h.getInfo().objective_function_value == pytest.approx(ours.objective, abs=1e-6)
    else:
        assert status == highspy.HighsModelStatus.kInfeasible


def test_strategy_roles(nsfnet):
    sc = nsfnet.with_dc(3)
    assert DcNfv(frozenset({3, 5})).effective_roles(sc).nfv_nodes == {5}
    assert NfvAll().effective_roles(sc).dc_nodes == frozenset()
    assert DcOnly().effective_roles(sc).nfv_nodes == frozenset()
    assert list(itertools.chain.from_iterable(fs for _, fs in MB.of({5: ["AO"], 3: ["NAT"]}).placements)) == ["NAT", "AO"]
