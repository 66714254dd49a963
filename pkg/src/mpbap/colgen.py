"""Restricted master problem over voyage columns and the pricing loop."""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .cuts import Cut
from .graph import VoyageGraph, shortest_path
from .lp import EQ, INF, LE, LinearProgram, LpSolution, SimplexSolver

RC_TOL = 1e-6


@dataclass(frozen=True)
class Column:
    ship: int
    nodes: tuple[int, ...]
    speeds: tuple[int, ...]
    cost: float
    visits: tuple[tuple[int, int, int], ...]   # (port, berth type, berthing time)
    handling: tuple[int, ...]
    artificial: bool = False

    def visit_at(self, port: int) -> tuple[int, int] | None:
        for p, k, t in self.visits:
            if p == port:
                return k, t
        return None

    def footprint(self):
        """Occupied (port, berth type, hour) cells."""
        return [(p, k, tt) for (p, k, t), h in zip(self.visits, self.handling) for tt in range(t, t + h)]

    @property
    def key(self):
        return self.ship, self.nodes, self.artificial


def make_column(graph: VoyageGraph, ship: int, nodes, speeds, cost: float | None = None) -> Column:
    visits = graph.visits(nodes)
    handling = tuple(graph.handling(ship, p, k) for p, k, _ in visits)
    if cost is None:
        cost = graph.path_cost(ship, nodes)
    return Column(ship, tuple(int(v) for v in nodes), tuple(speeds), float(cost), visits, handling)


@dataclass
class DualPrices:
    alpha: np.ndarray                          # per ship convexity row
    mu: dict[tuple[int, int], np.ndarray]      # per (port, type), indexed by t - open
    cut: np.ndarray                            # per active cut
    windows: dict[tuple[int, int], tuple[int, int]] = field(default_factory=dict)

    def mu_at(self, p, k, t) -> float:
        return float(self.mu[p, k][t - self.windows[p, k][0]])


def reduced_cost(column: Column, duals: DualPrices, cuts: list[Cut]) -> float:
    """Cost minus the duals of every master row the column touches."""
    value = column.cost
    for (p, k, t), h in zip(column.visits, column.handling):
        value -= sum(duals.mu_at(p, k, tt) for tt in range(t, t + h))
        for cut, beta in zip(cuts, duals.cut):
            if cut.port != p or cut.berth_type != k:
                continue
            rng = cut.ranges[column.ship]
            if rng is not None and rng[0] <= t <= rng[1]:
                value -= beta
    return value - float(duals.alpha[column.ship])


@dataclass
class CGStats:
    rmp_time: float = 0.0
    pricing_time: float = 0.0
    iterations: int = 0


@dataclass
class CGResult:
    status: str            # converged | infeasible | timeout
    solution: LpSolution | None
    iterations: int


def longest_path_cost(graph: VoyageGraph, ship: int) -> float:
    arcs = graph.ships[ship]
    dist = arcs.layers[0].entry_cost.copy()
    for c in arcs.legs:
        tot = dist[:, None] + np.where(np.isfinite(c), c, -np.inf)
        dist = tot.max(axis=0)
    return float(dist.max())


def seed_columns(graph: VoyageGraph) -> list[Column]:
    """Each ship's cheapest voyage, ignoring the other ships."""
    seeds = []
    for i in range(len(graph.ships)):
        res = shortest_path(graph, i)
        seeds.append(make_column(graph, i, res.nodes, res.speeds, res.cost))
    return seeds


def seeds_feasible(graph: VoyageGraph, columns, blocked=None) -> bool:
    use: dict[tuple[int, int, int], int] = dict(blocked or {})
    for col in columns:
        for cell in col.footprint():
            use[cell] = use.get(cell, 0) + 1
    return all(n <= graph.capacity[p, k] for (p, k, _), n in use.items())


class MasterProblem:
    """LP relaxation of the berth-type set partitioning model.

    Rows: one convexity equality per ship, one capacity row per
    (port, berth type, hour) with right-hand side ``count - blocked`` and one
    row per active cut.  Every ship also owns an artificial column of cost
    ``big_m`` so the master stays feasible under any branching mask.
    """

    def __init__(self, graph: VoyageGraph, blocked: dict | None = None, big_m: float | None = None):
        self.graph = graph
        self.n_ships = len(graph.ships)
        self.blocked = dict(blocked or {})
        if big_m is None:
            big_m = 10.0 * sum(longest_path_cost(graph, i) for i in range(self.n_ships))
        self.big_m = max(big_m, 1.0)
        lp = LinearProgram()
        for i in range(self.n_ships):
            lp.add_var(self.big_m, name=f"art{i}")
        for i in range(self.n_ships):
            lp.add_row({i: 1.0}, EQ, 1.0, name=f"conv{i}")
        self.cap_base: dict[tuple[int, int], int] = {}
        for (p, k), (s, e) in sorted(graph.group_window.items()):
            self.cap_base[p, k] = lp.n_rows
            for t in range(s, e):
                lp.add_row({}, LE, self.residual(p, k, t), name=f"cap{p}_{k}_{t}")
        self.solver = SimplexSolver(lp)
        self.columns: list[Column] = [
            Column(i, (), (), self.big_m, (), (), artificial=True) for i in range(self.n_ships)]
        self.col_index: dict[tuple, int] = {c.key: j for j, c in enumerate(self.columns)}
        self.cuts: list[Cut] = []
        self.cut_rows: list[int] = []
        self.last: LpSolution | None = None

    def residual(self, p: int, k: int, t: int) -> float:
        return float(self.graph.capacity[p, k] - self.blocked.get((p, k, t), 0))

    def cut_rhs(self, p: int, k: int, t1: int, t2: int) -> float:
        return max(self.residual(p, k, t) for t in range(t1, t2 + 1))

    def cap_row(self, p: int, k: int, t: int) -> int:
        return self.cap_base[p, k] + t - self.graph.group_window[p, k][0]

    def add_column(self, col: Column) -> int | None:
        if col.key in self.col_index:
            return None
        rows = [col.ship] + [self.cap_row(p, k, t) for p, k, t in col.footprint()]
        vals = [1.0] * len(rows)
        for cut, r in zip(self.cuts, self.cut_rows):
            if cut.coefficient(col):
                rows.append(r)
                vals.append(1.0)
        j = self.solver.add_column(col.cost, rows, vals)
        self.columns.append(col)
        self.col_index[col.key] = j
        return j

    def add_cut(self, cut: Cut) -> int:
        coeffs = {j: 1.0 for j, col in enumerate(self.columns) if cut.coefficient(col)}
        r = self.solver.add_row(coeffs, LE, cut.rhs)
        self.cuts.append(cut)
        self.cut_rows.append(r)
        return r

    @property
    def cut_keys(self) -> set:
        return {c.key for c in self.cuts}

    def set_mask(self, allowed) -> None:
        """``allowed(column) -> bool``; disallowed columns get upper bound 0."""
        for j, col in enumerate(self.columns):
            ok = col.artificial or allowed(col)
            self.solver.set_bounds(j, 0.0, INF if ok else 0.0)

    def solve(self) -> LpSolution:
        sol = self.solver.solve()
        self.last = sol
        return sol

    def duals(self, sol: LpSolution) -> DualPrices:
        y = sol.duals
        mu = {}
        for (p, k), (s, e) in self.graph.group_window.items():
            base = self.cap_base[p, k]
            mu[p, k] = y[base:base + e - s].copy()
        cut = np.array([y[r] for r in self.cut_rows])
        return DualPrices(y[:self.n_ships].copy(), mu, cut, dict(self.graph.group_window))

    def node_weights(self, ship: int, duals: DualPrices) -> np.ndarray:
        """Per-node pricing adjustment: minus the capacity and cut duals the node would consume."""
        g = self.graph
        w = np.zeros(g.n_nodes)
        for layer in g.ships[ship].layers:
            p = layer.port
            for k in range(len(g.instance.ports[p].berth_types)):
                s, e = g.group_window[p, k]
                h = layer.call.handling[k]
                prefix = np.concatenate([[0.0], np.cumsum(duals.mu[p, k])])
                ts = np.arange(s, e)
                hi = np.minimum(ts + h, e) - s
                base = g.group_base[p, k]
                w[base:base + e - s] -= prefix[hi] - prefix[ts - s]
        for cut, beta in zip(self.cuts, duals.cut):
            if beta == 0.0:
                continue
            rng = cut.ranges[ship]
            if rng is None:
                continue
            s, _ = g.group_window[cut.port, cut.berth_type]
            base = g.group_base[cut.port, cut.berth_type]
            w[base + rng[0] - s:base + rng[1] - s + 1] -= beta
        return w

    def artificial_weight(self, x) -> float:
        return float(sum(x[j] for j, c in enumerate(self.columns) if c.artificial))

    def price(self, sol: LpSolution, masks=None):
        """One pricing round.  Returns (columns added, ships with no allowed voyage)."""
        duals = self.duals(sol)
        added, infeasible = [], []
        for i in range(self.n_ships):
            w = self.node_weights(i, duals)
            allowed = None if masks is None else masks.get(i)
            res = shortest_path(self.graph, i, w, allowed)
            if res is None:
                infeasible.append(i)
                continue
            rc = res.weight - duals.alpha[i]
            if rc < -RC_TOL:
                col = make_column(self.graph, i, res.nodes, res.speeds, res.cost)
                if self.add_column(col) is not None:
                    added.append(col)
        return added, infeasible


def column_generation(master: MasterProblem, masks=None, stats: CGStats | None = None,
                      deadline: float | None = None, max_iterations: int = 100000) -> CGResult:
    """Alternate master solves and pricing until no negative reduced cost voyage remains."""
    stats = stats if stats is not None else CGStats()
    it = 0
    while True:
        t0 = time.perf_counter()
        sol = master.solve()
        stats.rmp_time += time.perf_counter() - t0
        if not sol.optimal:
            raise RuntimeError(f"master LP ended with status {sol.status}")
        it += 1
        stats.iterations += 1
        if deadline is not None and time.perf_counter() > deadline:
            return CGResult("timeout", sol, it)
        t0 = time.perf_counter()
        added, infeasible = master.price(sol, masks)
        stats.pricing_time += time.perf_counter() - t0
        if infeasible:
            return CGResult("infeasible", sol, it)
        if not added or it >= max_iterations:
            return CGResult("converged", sol, it)


def build_rmp(graph: VoyageGraph, seeds=None, blocked=None) -> MasterProblem:
    master = MasterProblem(graph, blocked)
    for col in (seeds if seeds is not None else seed_columns(graph)):
        master.add_column(col)
    return master
