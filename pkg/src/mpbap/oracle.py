"""Ground truth for tiny instances: exhaustive enumeration and the arc-flow LP."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import VoyageGraph, build_graph
from .lp import EQ, LE, LinearProgram, lp_solve
from .model import (BerthType, CostWeights, Instance, Port, PortCall, Ship, SpeedGrid,
                    fuel_per_distance, travel_hours)

MAX_JOINT = 10 ** 7
MAX_FLOW_ROWS = 20000


class OracleRefusal(RuntimeError):
    """The instance is too large for the requested oracle."""


@dataclass(frozen=True)
class Voyage:
    ship: int
    nodes: tuple[int, ...]
    cost: float
    cells: np.ndarray          # graph node ids covered by the berthing periods


@dataclass
class EnumerationResult:
    cost: float
    assignment: tuple[Voyage, ...] | None
    examined: int


# -----------------------------------------------------------------------------
# independent cost recomputation

def voyage_cost(instance: Instance, ship_idx: int, visits, speeds=None) -> float:
    """Cost of a voyage recomputed from the objective terms alone.

    ``visits`` lists (port index, berth type index, berthing time) along the
    route.  When ``speeds`` is omitted the cheapest admissible speed is used
    on every leg.
    """
    ship = instance.ships[ship_idx]
    cw = instance.costs
    total = 0.0
    for j, (call, (p, k, t)) in enumerate(zip(ship.calls, visits)):
        h = call.handling[k]
        total += cw.handling * h + cw.delay * max(0, t + h - call.eft)
        if j + 1 == len(visits):
            break
        nxt_call = ship.calls[j + 1]
        t_next = visits[j + 1][2]
        dist = instance.ports[p].distances[nxt_call.port]
        options = []
        levels = instance.speeds.levels if speeds is None else [instance.speeds.levels[speeds[j]]]
        for v in levels:
            arrive = t + h + travel_hours(dist, v)
            if arrive <= t_next:
                options.append(cw.fuel * fuel_per_distance(ship, v) * dist + cw.idle * (t_next - arrive))
        if not options:
            return math.inf
        total += min(options)
    return total


# -----------------------------------------------------------------------------
# enumeration

def ship_voyages(graph: VoyageGraph, ship: int, limit: int | None = None) -> list[Voyage]:
    """Every source-to-sink voyage of one ship, cheapest first."""
    arcs = graph.ships[ship]
    layers = arcs.layers
    out = []

    def extend(j, pos, cost, trail):
        if limit is not None and len(out) > limit:
            raise OracleRefusal(f"ship {ship} has more than {limit} voyages")
        if j + 1 == len(layers):
            nodes = tuple(int(layers[q].nodes[i]) for q, i in enumerate(trail))
            out.append((cost, nodes))
            return
        row = arcs.legs[j][pos]
        for q in np.flatnonzero(np.isfinite(row)):
            extend(j + 1, int(q), cost + float(row[q]), trail + [int(q)])

    for i, c in enumerate(layers[0].entry_cost):
        extend(0, i, float(c), [i])
    out.sort()
    voyages = []
    for cost, nodes in out:
        cells = []
        for v in nodes:
            p, k, t = int(graph.node_port[v]), int(graph.node_type[v]), int(graph.node_time[v])
            h = graph.handling(ship, p, k)
            base = graph.group_base[p, k] - graph.group_window[p, k][0]
            cells.extend(base + tt for tt in range(t, t + h))
        voyages.append(Voyage(ship, nodes, cost, np.array(cells, dtype=int)))
    return voyages


def count_voyages(graph: VoyageGraph, ship: int) -> int:
    arcs = graph.ships[ship]
    n = np.ones(len(arcs.layers[0].nodes))
    for c in arcs.legs:
        n = n @ np.isfinite(c).astype(float)
    return int(n.sum())


def estimated_joint(graph: VoyageGraph) -> float:
    return float(np.prod([float(count_voyages(graph, i)) for i in range(len(graph.ships))]))


def _capacity_vector(graph: VoyageGraph) -> np.ndarray:
    cap = np.zeros(graph.n_nodes, dtype=int)
    for (p, k), c in graph.capacity.items():
        cap[graph.group_nodes(p, k)] = c
    return cap


def _check_size(graph: VoyageGraph, max_joint: float):
    est = estimated_joint(graph)
    if est > max_joint:
        raise OracleRefusal(f"estimated {est:.3g} joint assignments exceeds the cap {max_joint:.3g}")


def enumerate_optimum(instance: Instance, max_ships: int = 6, max_joint: float = MAX_JOINT,
                      prune: bool = True, graph: VoyageGraph | None = None) -> EnumerationResult:
    """Exact optimum by depth-first search over per-ship voyages.

    Partial assignments are dropped when they overload a (port, type, hour)
    cell and, with ``prune``, when their cost plus the cheapest completion
    cannot beat the incumbent.
    """
    if len(instance.ships) > max_ships:
        raise OracleRefusal(f"{len(instance.ships)} ships exceeds the cap {max_ships}")
    graph = graph or build_graph(instance)
    _check_size(graph, max_joint)
    voyages = [ship_voyages(graph, i) for i in range(len(instance.ships))]
    cap = _capacity_vector(graph)
    rest = np.concatenate([np.cumsum([v[0].cost for v in voyages][::-1])[::-1], [0.0]])
    n = len(voyages)
    best = [math.inf, None]
    examined = [0]
    use = np.zeros(graph.n_nodes, dtype=int)

    def dfs(i, cost, chosen):
        if i == n:
            examined[0] += 1
            if cost < best[0]:
                best[0], best[1] = cost, tuple(chosen)
            return
        for v in voyages[i]:
            if prune and cost + v.cost + rest[i + 1] >= best[0]:
                break
            if np.any(use[v.cells] >= cap[v.cells]):
                continue
            use[v.cells] += 1
            chosen.append(v)
            dfs(i + 1, cost + v.cost, chosen)
            chosen.pop()
            use[v.cells] -= 1

    dfs(0, 0.0, [])
    return EnumerationResult(best[0], best[1], examined[0])


def feasible_assignments(instance: Instance, max_joint: float = MAX_JOINT,
                         graph: VoyageGraph | None = None):
    """Per-ship voyage lists and an (M, n_ships) array of every capacity-feasible joint choice."""
    graph = graph or build_graph(instance)
    _check_size(graph, max_joint)
    voyages = [ship_voyages(graph, i) for i in range(len(instance.ships))]
    cap = _capacity_vector(graph)
    rows = []
    use = np.zeros(graph.n_nodes, dtype=int)
    n = len(voyages)

    def dfs(i, chosen):
        if i == n:
            rows.append(tuple(chosen))
            return
        for q, v in enumerate(voyages[i]):
            if np.any(use[v.cells] >= cap[v.cells]):
                continue
            use[v.cells] += 1
            chosen.append(q)
            dfs(i + 1, chosen)
            chosen.pop()
            use[v.cells] -= 1

    dfs(0, [])
    return voyages, np.array(rows, dtype=int).reshape(len(rows), n)


# -----------------------------------------------------------------------------
# arc-flow relaxation

def build_flow_lp(instance: Instance, graph: VoyageGraph | None = None,
                  max_rows: int = MAX_FLOW_ROWS, per_speed: bool = False) -> LinearProgram:
    """Arc-flow LP over every ship's arc set with shared capacity rows.

    With ``per_speed`` every speed level gets its own arc variable instead of
    only the cheapest one per node pair.
    """
    graph = graph or build_graph(instance, prune_speeds=not per_speed)
    n_rows = len(graph.ships) + sum(sum(len(l.nodes) for l in a.layers) for a in graph.ships) + graph.n_nodes
    if n_rows > max_rows:
        raise OracleRefusal(f"flow LP would have {n_rows} rows (cap {max_rows})")
    lp = LinearProgram()
    cap_terms: dict[int, dict[int, float]] = {}
    for i, arcs in enumerate(graph.ships):
        layers = arcs.layers
        inflow = [[[] for _ in l.nodes] for l in layers]
        outflow = [[[] for _ in l.nodes] for l in layers]
        source = []
        for q, c in enumerate(layers[0].entry_cost):
            j = lp.add_var(float(c))
            source.append(j)
            inflow[0][q].append(j)
        for li, layer in enumerate(layers[:-1]):
            full = arcs.leg_all[li] if arcs.leg_all is not None else arcs.legs[li][:, :, None]
            for u, v, s in zip(*np.nonzero(np.isfinite(full))):
                j = lp.add_var(float(full[u, v, s]))
                outflow[li][u].append(j)
                inflow[li + 1][v].append(j)
        for q in range(len(layers[-1].nodes)):
            outflow[-1][q].append(lp.add_var(0.0))
        lp.add_row({j: 1.0 for j in source}, EQ, 1.0, name=f"src{i}")
        for li, layer in enumerate(layers):
            for q, node in enumerate(layer.nodes):
                coeffs = {j: 1.0 for j in inflow[li][q]}
                coeffs.update({j: -1.0 for j in outflow[li][q]})
                lp.add_row(coeffs, EQ, 0.0, name=f"bal{i}_{node}")
                # berthing at ``node`` covers [t, t + h) of its (port, type)
                p, k, t = int(graph.node_port[node]), int(graph.node_type[node]), int(graph.node_time[node])
                h = layer.call.handling[k]
                for cell in range(node, node + h):
                    for j in inflow[li][q]:
                        cap_terms.setdefault(cell, {})[j] = 1.0
    for (p, k), c in sorted(graph.capacity.items()):
        for cell in graph.group_nodes(p, k):
            terms = cap_terms.get(int(cell))
            if terms:
                lp.add_row(terms, LE, float(c), name=f"cap{cell}")
    return lp


def network_flow_lp_bound(instance: Instance, graph: VoyageGraph | None = None,
                          per_speed: bool = False) -> float:
    lp = build_flow_lp(instance, graph, per_speed=per_speed)
    # plain Dantzig pricing takes fewer pivots on this well conditioned network LP
    sol = lp_solve(lp, pricing="dantzig")
    if not sol.optimal:
        raise RuntimeError(f"flow LP ended with status {sol.status}")
    return sol.objective


# -----------------------------------------------------------------------------
# micro instances

def micro_instance(seed: int, max_joint: float = 2e5) -> Instance:
    """A random instance small enough for exhaustive enumeration.

    2-4 ships, 1-2 ports, 1-2 berth types per port, windows of at most 30 h.
    Draws are repeated (deterministically) until the joint assignment
    estimate is below ``max_joint``.
    """
    rng = np.random.default_rng(seed)
    while True:
        inst = _draw_micro(rng, seed)
        try:
            g = build_graph(inst)
        except ValueError:
            continue
        if estimated_joint(g) > max_joint:
            continue
        if math.isfinite(enumerate_optimum(inst, graph=g, max_joint=max_joint).cost):
            return inst


def _draw_micro(rng, seed) -> Instance:
    n_ships = int(rng.integers(2, 5))
    n_ports = int(rng.integers(1, 3))
    names = [f"P{j + 1}" for j in range(n_ports)]
    dist = {(a, b): int(rng.integers(20, 60)) for a in names for b in names if a != b}
    ports = []
    for j, name in enumerate(names):
        n_types = int(rng.integers(1, 3))
        types = []
        for k in range(n_types):
            open_ = 0 if j == 0 else int(rng.integers(0, 4))
            close = open_ + int(rng.integers(10, 25))
            count = int(rng.integers(1, 3)) if n_types == 1 else 1
            types.append(BerthType(f"K{k}", count, open_, close))
        ports.append(Port(name, tuple(types), {b: dist[name, b] for b in names if b != name}))
    ships = []
    for i in range(n_ships):
        route = list(names) if rng.random() < 0.7 else list(rng.permutation(names))
        calls = []
        t = int(rng.integers(0, 4))
        for name in route:
            port = ports[names.index(name)]
            hand = tuple(int(rng.integers(3, 9)) for _ in port.berth_types)
            start = max(t, min(bt.open for bt in port.berth_types))
            latest = max(bt.close - h for bt, h in zip(port.berth_types, hand))
            start = min(start, latest)
            eft = start + min(hand) + int(rng.integers(0, 4))
            calls.append(PortCall(name, start, eft, hand))
            t = start + min(hand) + 2
        ships.append(Ship(f"S{i + 1}", 16.0, float(rng.uniform(2.0, 4.0)), tuple(calls)))
    speeds = SpeedGrid.evenly(14.0, 19.0, 11)
    return Instance(tuple(ports), tuple(ships), speeds, CostWeights(), seed=seed,
                    descriptor=f"micro-{seed}")


def staggered_pair_instance() -> Instance:
    """Two ships, one shared berth at the second port, fractional root without cuts.

    The LP relaxation splits each ship over two berthing times at P2 so that
    the capacity rows hold while the pair of half voyages overlap in a way
    no integer schedule can.  The interval cuts close this gap completely.
    """
    speeds = SpeedGrid.evenly(14.0, 19.0, 11)
    p1 = Port("P1", (BerthType("K0", 2, 0, 12),), {"P2": 33.0})
    p2 = Port("P2", (BerthType("K0", 1, 5, 20),), {"P1": 33.0})
    ships = (
        Ship("S1", 16.0, 2.8, (PortCall("P1", 0, 5, (4,)), PortCall("P2", 5, 7, (2,)))),
        Ship("S2", 16.0, 3.35, (PortCall("P1", 0, 2, (2,)), PortCall("P2", 5, 14, (4,)))),
    )
    return Instance((p1, p2), ships, speeds, CostWeights(), descriptor="staggered-pair")
