import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mpbap.colgen import (DualPrices, MasterProblem, build_rmp, column_generation, longest_path_cost,
                          make_column, reduced_cost, seed_columns, seeds_feasible)
from mpbap.cuts import make_cut
from mpbap.graph import build_graph
from mpbap.model import BerthType, Instance, Port, PortCall, Ship, SpeedGrid
from mpbap.oracle import (micro_instance, network_flow_lp_bound, ship_voyages, staggered_pair_instance,
                          voyage_cost)
from mpbap.search import root_bound

SPEEDS = SpeedGrid.evenly(14.0, 19.0, 11)


def clash_instance(count=1, n_ships=2):
    """Ships that all want the same early slot at a single port."""
    port = Port("P1", (BerthType("K0", count, 0, 12),), {})
    ships = tuple(Ship(f"S{i + 1}", 16.0, 3.0, (PortCall("P1", 0, 3, (3,)),)) for i in range(n_ships))
    return Instance((port,), ships, SPEEDS)


def test_single_ship_single_column():
    inst = clash_instance(n_ships=1)
    g = build_graph(inst)
    master = build_rmp(g)
    sol = master.solve()
    assert sol.objective == pytest.approx(master.columns[1].cost)
    assert sol.x[1] == pytest.approx(1.0)


def test_disjoint_columns_sum():
    inst = clash_instance(n_ships=2)
    g = build_graph(inst)
    master = MasterProblem(g)
    a = make_column(g, 0, (g.node_id(0, 0, 0),), ())
    b = make_column(g, 1, (g.node_id(0, 0, 3),), ())
    master.add_column(a)
    master.add_column(b)
    assert master.solve().objective == pytest.approx(a.cost + b.cost)
    assert master.add_column(a) is None


def test_two_berths_allow_simultaneous_berthing():
    for count, ok in ((2, True), (1, False)):
        g = build_graph(clash_instance(count=count))
        master = MasterProblem(g)
        for i in range(2):
            master.add_column(make_column(g, i, (g.node_id(0, 0, 0),), ()))
        sol = master.solve()
        assert (master.artificial_weight(sol.x) < 1e-9) == ok


def test_seed_clash_uses_artificials_then_converges():
    inst = clash_instance()
    g = build_graph(inst)
    seeds = seed_columns(g)
    assert not seeds_feasible(g, seeds)
    master = build_rmp(g, seeds)
    first = master.solve()
    assert master.artificial_weight(first.x) > 0.5
    res = column_generation(master)
    assert res.status == "converged"
    assert master.artificial_weight(res.solution.x) < 1e-9


def test_big_m_scale():
    g = build_graph(clash_instance())
    master = MasterProblem(g)
    assert master.big_m == pytest.approx(10 * sum(longest_path_cost(g, i) for i in range(2)))
    assert longest_path_cost(g, 0) == pytest.approx(max(v.cost for v in ship_voyages(g, 0)))


def test_infeasible_instance_keeps_artificials():
    # three ships, one berth, window too short for all of them
    port = Port("P1", (BerthType("K0", 1, 0, 7),), {})
    ships = tuple(Ship(f"S{i}", 16.0, 3.0, (PortCall("P1", 0, 3, (3,)),)) for i in range(3))
    g = build_graph(Instance((port,), ships, SPEEDS))
    master = build_rmp(g)
    res = column_generation(master)
    assert master.artificial_weight(res.solution.x) > 1e-6


def _zero_duals(g, n_cuts=0):
    mu = {key: np.zeros(e - s) for key, (s, e) in g.group_window.items()}
    return DualPrices(np.zeros(len(g.ships)), mu, np.zeros(n_cuts), dict(g.group_window))


def test_reduced_cost_examples():
    g = build_graph(clash_instance())
    col = make_column(g, 0, (g.node_id(0, 0, 2),), ())
    duals = _zero_duals(g)
    duals.alpha[0] = col.cost
    assert reduced_cost(col, duals, []) == pytest.approx(0.0)
    duals = _zero_duals(g)
    duals.mu[0, 0][:] = -5.0
    # h = 3 rows covered, each contributes +5
    assert reduced_cost(col, duals, []) == pytest.approx(col.cost + 15.0)


def test_reduced_cost_with_cut_uses_row_coefficient():
    g = build_graph(clash_instance())
    cut = make_cut(g, 0, 0, 0, 2, 4)
    duals = _zero_duals(g, 1)
    duals.cut[0] = -7.0
    for ship in (0, 1):
        for t in range(0, 10):
            col = make_column(g, ship, (g.node_id(0, 0, t),), ())
            assert reduced_cost(col, duals, [cut]) == pytest.approx(col.cost + 7.0 * cut.coefficient(col))


@pytest.mark.parametrize("seed", range(0, 60, 3))
def test_converged_pricing_has_no_negative_column(seed):
    inst = micro_instance(seed)
    g = build_graph(inst)
    master = build_rmp(g)
    res = column_generation(master)
    duals = master.duals(res.solution)
    for i in range(len(inst.ships)):
        for v in ship_voyages(g, i):
            col = make_column(g, i, v.nodes, (), v.cost)
            assert reduced_cost(col, duals, master.cuts) >= -1e-6
    # a second pricing round finds nothing
    added, infeasible = master.price(res.solution)
    assert added == [] and infeasible == []


@pytest.mark.parametrize("seed", [0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, -1])
def test_node_weights_agree_with_reduced_cost(seed):
    inst = staggered_pair_instance() if seed < 0 else micro_instance(seed)
    _, state = root_bound(inst, "root")
    master, g = state.master, state.graph
    sol = master.last
    duals = master.duals(sol)
    for i in range(len(inst.ships)):
        w = master.node_weights(i, duals)
        for v in ship_voyages(g, i)[:100]:
            col = make_column(g, i, v.nodes, (), v.cost)
            via_nodes = v.cost + w[list(v.nodes)].sum() - duals.alpha[i]
            assert via_nodes == pytest.approx(reduced_cost(col, duals, master.cuts), abs=1e-6)


def test_duals_have_repo_signs():
    inst = micro_instance(8)
    g = build_graph(inst)
    master = build_rmp(g)
    res = column_generation(master)
    duals = master.duals(res.solution)
    assert all(np.all(m <= 1e-9) for m in duals.mu.values())
    assert np.all(duals.cut <= 1e-9)


@pytest.mark.parametrize("seed", range(0, 60, 4))
def test_objective_never_increases_during_pricing(seed):
    inst = micro_instance(seed)
    g = build_graph(inst)
    master = build_rmp(g)
    last = math.inf
    while True:
        sol = master.solve()
        assert sol.objective <= last + 1e-7 * max(1.0, abs(last) if math.isfinite(last) else 1.0)
        last = sol.objective
        added, _ = master.price(sol)
        if not added:
            break


def test_first_round_improves_on_expensive_seeds():
    inst = micro_instance(2)
    g = build_graph(inst)
    seeds = []
    for i in range(len(inst.ships)):
        worst = ship_voyages(g, i)[-1]
        seeds.append(make_column(g, i, worst.nodes, (), worst.cost))
    master = build_rmp(g, seeds)
    sol = master.solve()
    added, _ = master.price(sol)
    assert added
    duals = master.duals(sol)
    assert all(reduced_cost(c, duals, []) < -1e-6 for c in added)


@pytest.mark.parametrize("seed", range(0, 60, 6))
def test_root_bound_equals_flow_lp(seed):
    inst = micro_instance(seed)
    g = build_graph(inst)
    res = column_generation(build_rmp(g))
    flow = network_flow_lp_bound(inst, g)
    assert res.solution.objective == pytest.approx(flow, rel=1e-6)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 59))
def test_column_invariants(seed):
    inst = micro_instance(seed)
    g = build_graph(inst)
    master = build_rmp(g)
    column_generation(master)
    for col in master.columns:
        if col.artificial:
            continue
        ship = inst.ships[col.ship]
        assert tuple(inst.ports[p].id for p, _, _ in col.visits) == ship.route
        assert col.cost == pytest.approx(voyage_cost(inst, col.ship, col.visits, col.speeds), abs=1e-9)
        for p, k, t in col.footprint():
            s, e = g.group_window[p, k]
            assert s <= t < e
