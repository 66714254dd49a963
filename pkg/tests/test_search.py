import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpbap.colgen import make_column
from mpbap.graph import build_graph, shortest_path
from mpbap.model import BerthType, Instance, Port, PortCall, Ship, SpeedGrid, generate_instance
from mpbap.oracle import enumerate_optimum, micro_instance, staggered_pair_instance
from mpbap.search import (FEASIBLE, INFEASIBLE, OPTIMAL, TIMEOUT, BnbNode, BranchConstraint, BranchingError,
                          SolveOptions, SolveReport, _Search, assign_berths, branch, is_integral,
                          plan_rows, root_bound, select_branch_candidate, solve)

SPEEDS = SpeedGrid.evenly(14.0, 19.0, 11)


def single_port(n_ships, count=1, close=12, h=3):
    port = Port("P1", (BerthType("K0", count, 0, close),), {})
    ships = tuple(Ship(f"S{i + 1}", 16.0, 3.0, (PortCall("P1", 0, h, (h,)),)) for i in range(n_ships))
    return Instance((port,), ships, SPEEDS)


def two_type_port():
    port = Port("P1", (BerthType("K0", 1, 0, 12), BerthType("K1", 1, 0, 12)), {})
    ship = Ship("S1", 16.0, 3.0, (PortCall("P1", 0, 3, (3, 3)),))
    return Instance((port,), (ship,), SPEEDS)


def test_one_ship_is_its_shortest_path():
    inst = micro_instance(0).subset(["S1"])
    res = solve(inst)
    g = build_graph(inst)
    assert res.report.status == OPTIMAL
    assert res.cost == pytest.approx(shortest_path(g, 0).cost)
    assert res.report.nodes == 1 and res.report.gap == 0.0


def test_forced_overlap_matches_enumeration():
    inst = single_port(2)
    res = solve(inst)
    assert res.cost == pytest.approx(enumerate_optimum(inst).cost)
    a, b = res.columns
    assert a.visits[0][2] + 3 <= b.visits[0][2] or b.visits[0][2] + 3 <= a.visits[0][2]


def test_infeasible_instance_reports_certificate():
    res = solve(single_port(3, close=7))
    assert res.report.status == INFEASIBLE
    assert res.columns == []
    assert "cannot share" in res.certificate
    assert math.isinf(res.report.lb) and math.isinf(res.report.z)


def test_blocked_capacity_certificate_names_ship():
    inst = single_port(1, close=6)
    blocked = {(0, 0, t): 1 for t in range(0, 6)}
    res = solve(inst, blocked=blocked)
    assert res.report.status == INFEASIBLE
    assert "S1" in res.certificate


def test_blocked_cells_are_respected():
    inst = single_port(2, count=2)
    blocked = {(0, 0, t): 1 for t in range(0, 4)}
    res = solve(inst, blocked=blocked)
    use = dict(blocked)
    for col in res.columns:
        for cell in col.footprint():
            use[cell] = use.get(cell, 0) + 1
    assert max(use.values()) <= 2
    assert res.cost > solve(inst).cost


def test_options_validation():
    with pytest.raises(ValueError):
        SolveOptions(cut_policy="some")
    with pytest.raises(ValueError):
        SolveOptions(time_limit=0)
    with pytest.raises(ValueError):
        SolveOptions(final_mip_fraction=1.0)


# -----------------------------------------------------------------------------
# branching

def _cols(g, ship, times, types=None):
    types = types or [0] * len(times)
    return [make_column(g, ship, (g.node_id(0, k, t),), ()) for t, k in zip(times, types)]


def test_two_point_statistics():
    g = build_graph(single_port(1))
    cols = _cols(g, 0, [2, 6])
    cand = select_branch_candidate(cols, np.array([0.5, 0.5]))
    assert (cand.ship, cand.port, cand.kind) == (0, 0, "time")
    assert cand.value == pytest.approx(4.0) and cand.spread == pytest.approx(2.0)


def test_spread_ship_selected_among_integral_ones():
    g = build_graph(single_port(3, count=3))
    cols = _cols(g, 0, [1]) + _cols(g, 1, [3, 8]) + _cols(g, 2, [5])
    cand = select_branch_candidate(cols, np.array([1.0, 0.3, 0.7, 1.0]))
    assert cand.ship == 1
    assert cand.value == pytest.approx(0.3 * 3 + 0.7 * 8)


def test_type_fallback():
    g = build_graph(two_type_port())
    cols = _cols(g, 0, [2, 2], [0, 1])
    cand = select_branch_candidate(cols, np.array([0.5, 0.5]))
    assert cand.kind == "type" and cand.value == frozenset({0})


def test_integral_solution_is_rejected():
    g = build_graph(single_port(1))
    cols = _cols(g, 0, [2])
    assert is_integral(cols, np.array([1.0]))
    with pytest.raises(BranchingError):
        select_branch_candidate(cols, np.array([1.0]))


@settings(max_examples=100)
@given(st.floats(0.01, 8.99), st.integers(0, 9), st.integers(0, 1))
def test_children_partition_the_parent(mean, t, k):
    g = build_graph(two_type_port())
    root = BnbNode(0, None, 0, (), 0.0)
    counter = iter(range(1, 10))
    cand = select_branch_candidate(_cols(g, 0, [0, 9]), np.array([1 - mean / 9, mean / 9]))
    left, right = branch(root, cand, counter)
    col = make_column(g, 0, (g.node_id(0, k, t),), ())
    assert left.admits(col) != right.admits(col)
    assert left.constraints[-1].value == math.floor(cand.value + 1e-9)
    assert right.constraints[-1].value == left.constraints[-1].value + 1


def test_type_children_partition():
    g = build_graph(two_type_port())
    cand = select_branch_candidate(_cols(g, 0, [2, 2], [0, 1]), np.array([0.5, 0.5]))
    left, right = branch(BnbNode(0, None, 0, (), 0.0), cand, iter(range(1, 5)))
    for k in (0, 1):
        for t in range(0, 9):
            col = make_column(g, 0, (g.node_id(0, k, t),), ())
            assert left.admits(col) != right.admits(col)


def test_inconsistent_node_detected():
    g = build_graph(single_port(1))
    node = BnbNode(3, 0, 2, (BranchConstraint(0, 0, "le", 2), BranchConstraint(0, 0, "ge", 3)), 0.0)
    assert not node.consistent(g)
    node = BnbNode(3, 0, 2, (BranchConstraint(0, 0, "le", 4), BranchConstraint(0, 0, "ge", 3)), 0.0)
    assert node.consistent(g)


# -----------------------------------------------------------------------------
# tree search

class AuditSearch(_Search):
    """Records the queue key and the converged objective of every evaluated node."""

    def __init__(self, *args, **kw):
        super().__init__(*args, **kw)
        self.trace = []

    def evaluate(self, node):
        status, sol = super().evaluate(node)
        self.trace.append((node.id, node.parent, node.bound, status,
                           sol.objective if sol is not None else None, self.best))
        return status, sol


@pytest.mark.parametrize("policy", ["none", "root", "all"])
def test_bound_audit(policy, micro_suite):
    for inst, _ in micro_suite[:40]:
        s = AuditSearch(inst, SolveOptions(cut_policy=policy, time_limit=60))
        res = s.run()
        objective = {}
        last_key = -math.inf
        last_best = math.inf
        for nid, parent, key, status, obj, best in s.trace:
            assert key >= last_key - 1e-9
            last_key = key
            assert best <= last_best
            last_best = best
            if status == "done":
                objective[nid] = obj
                if parent is not None and parent in objective:
                    assert obj >= objective[parent] - 1e-6 * max(1.0, abs(obj))
        assert res.report.lb <= res.report.z + 1e-6


def test_root_integral_means_one_node():
    res = solve(micro_instance(0))
    if res.report.root_lb == pytest.approx(res.cost):
        assert res.report.nodes == 1


def test_staggered_pair_branches_without_cuts():
    inst = staggered_pair_instance()
    plain = solve(inst, SolveOptions(cut_policy="none"))
    cut = solve(inst, SolveOptions(cut_policy="root"))
    assert plain.cost == pytest.approx(cut.cost)
    assert plain.report.nodes > 1
    assert cut.report.nodes == 1 and cut.report.cuts >= 1


def test_root_bounds_ordered_by_policy(micro_suite):
    for inst, _ in micro_suite[:30]:
        none, _ = root_bound(inst, "none")
        root, _ = root_bound(inst, "root")
        assert root >= none - 1e-9 * max(1.0, abs(none))


def test_report_fields():
    res = solve(micro_instance(4))
    rep = res.report
    shares = rep.time_shares()
    assert set(shares) == {"rmp", "pricing", "separation", "branching", "final_mip"}
    assert all(0 <= v <= 100 for v in shares.values())
    assert sum(shares.values()) <= 100 + 1e-9
    d = rep.as_dict()
    assert "wall_time" not in d and d["gap_pct"] == 0.0
    assert rep.as_dict(timing=True)["wall_time"] == rep.wall_time
    assert SolveReport("timeout", 5.0, math.inf, 5.0, 1, 1, 1, 0).as_dict()["z"] is None
    assert SolveReport("feasible", 90.0, 100.0, 80.0, 1, 1, 1, 0).gap == pytest.approx(10.0)


def test_deterministic_counters():
    inst = micro_instance(12)
    a = solve(inst).report.as_dict()
    b = solve(inst).report.as_dict()
    assert a == b


def test_time_limit_paths():
    inst = generate_instance(8, 2, 3, "tight", seed=1)
    res = solve(inst, SolveOptions(time_limit=0.05, final_mip_fraction=0.5))
    assert res.report.status in (FEASIBLE, TIMEOUT, OPTIMAL)
    if res.report.status == TIMEOUT:
        assert res.columns == [] and math.isinf(res.report.z)
    if res.report.status == FEASIBLE:
        assert res.report.lb <= res.report.z


def test_final_mip_repairs_timeout():
    # a tiny budget on a branching instance still ends with a feasible plan or honest status
    inst = staggered_pair_instance()
    s = _Search(inst, SolveOptions(cut_policy="none", time_limit=10.0, final_mip_fraction=0.5))
    s.seed()
    s.evaluate(BnbNode(0, None, 0, (), -math.inf))
    s.final_mip()
    assert len(s.best_cols) == 2
    assert s.best >= enumerate_optimum(inst).cost - 1e-6


# -----------------------------------------------------------------------------
# plan export

@settings(max_examples=100)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 20), st.integers(1, 6)), max_size=25))
def test_assign_berths_is_a_coloring(raw):
    visits = [(p, 0, s, s + h, j) for j, (p, s, h) in enumerate(raw)]
    idx = assign_berths(visits)
    for a in range(len(visits)):
        for b in range(a + 1, len(visits)):
            va, vb = visits[a], visits[b]
            if va[0] == vb[0] and idx[a] == idx[b]:
                assert va[3] <= vb[2] or vb[3] <= va[2]
    # greedy by start time never opens more berths than the peak overlap
    for p in (0, 1):
        mine = [v for v in visits if v[0] == p]
        if mine:
            peak = max(sum(1 for v in mine if v[2] <= t < v[3]) for t in range(0, 27))
            assert max(i for i, v in zip(idx, visits) if v[0] == p) + 1 == peak


def test_plan_rows():
    res = solve(micro_instance(6))
    rows = plan_rows(res)
    assert len(rows) == sum(len(col.visits) for col in res.columns)
    assert set(rows[0]) == {"ship", "port", "berth_type", "berth_index_within_type", "start", "end", "speed_to_next_knots"}
    for r in rows:
        assert r["end"] > r["start"]
