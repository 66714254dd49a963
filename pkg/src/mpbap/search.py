"""Best-first branch-and-cut-and-price over the voyage master problem."""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .colgen import CGStats, Column, MasterProblem, column_generation, seed_columns
from .cuts import Cut, separate_cuts
from .graph import VoyageGraph, build_graph
from .lp import EQ, LE, INF, LinearProgram, branch_and_bound_binary
from .model import Instance

CUT_POLICIES = ("none", "root", "all")
LAMBDA_TOL = 1e-6
STD_TOL = 1e-9

OPTIMAL = "optimal"
FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
TIMEOUT = "timeout"          # time limit hit without an incumbent


class BranchingError(ValueError):
    pass


@dataclass(frozen=True)
class BranchConstraint:
    ship: int
    port: int
    kind: str            # "le", "ge", "in", "out"
    value: int | frozenset

    def admits(self, berth_type: int, t: int) -> bool:
        if self.kind == "le":
            return t <= self.value
        if self.kind == "ge":
            return t >= self.value
        if self.kind == "in":
            return berth_type in self.value
        return berth_type not in self.value

    def admits_column(self, col: Column) -> bool:
        if col.artificial or col.ship != self.ship:
            return True
        visit = col.visit_at(self.port)
        return visit is None or self.admits(*visit)


@dataclass
class BnbNode:
    id: int
    parent: int | None
    depth: int
    constraints: tuple[BranchConstraint, ...]
    bound: float
    status: str = "open"

    def admits(self, col: Column) -> bool:
        return all(c.admits_column(col) for c in self.constraints)

    def consistent(self, graph: VoyageGraph) -> bool:
        """Every constrained (ship, port) keeps at least one admissible node."""
        for ship, port in {(c.ship, c.port) for c in self.constraints}:
            arcs = graph.ships[ship]
            layer = arcs.layers[arcs.layer_position(port)]
            ok = False
            for v in layer.nodes:
                k, t = int(graph.node_type[v]), int(graph.node_time[v])
                if all(c.admits(k, t) for c in self.constraints if (c.ship, c.port) == (ship, port)):
                    ok = True
                    break
            if not ok:
                return False
        return True


@dataclass
class Candidate:
    ship: int
    port: int
    kind: str            # "time" or "type"
    value: float | frozenset
    spread: float


@dataclass
class SolveOptions:
    cut_policy: str = "root"
    time_limit: float = 300.0
    final_mip_fraction: float = 0.1
    max_cut_rounds: int = 20

    def __post_init__(self):
        if self.cut_policy not in CUT_POLICIES:
            raise ValueError(f"cut policy must be one of {CUT_POLICIES}")
        if not self.time_limit > 0:
            raise ValueError("time limit must be positive")
        if not 0 < self.final_mip_fraction < 1:
            raise ValueError("final MIP fraction must lie in (0, 1)")


@dataclass
class SolveReport:
    status: str
    lb: float
    z: float
    root_lb: float
    nodes: int
    cg_iterations: int
    columns: int
    cuts: int
    wall_time: float = 0.0
    times: dict = field(default_factory=dict)    # seconds per phase

    @property
    def gap(self) -> float:
        if not math.isfinite(self.z):
            return math.inf
        if self.z == 0:
            return 0.0
        return max(0.0, 100.0 * (self.z - self.lb) / self.z)

    def time_shares(self) -> dict:
        tot = self.wall_time if self.wall_time > 0 else 1.0
        return {k: min(100.0, 100.0 * v / tot) for k, v in self.times.items()}

    def as_dict(self, timing: bool = False) -> dict:
        d = {"status": self.status, "lb": _num(self.lb), "z": _num(self.z), "gap_pct": _num(self.gap),
             "root_lb": _num(self.root_lb), "nodes": self.nodes, "cg_iterations": self.cg_iterations,
             "columns": self.columns, "cuts": self.cuts}
        if timing:
            d["wall_time"] = self.wall_time
            d["time_pct"] = self.time_shares()
        return d


def _num(v: float):
    return v if math.isfinite(v) else None


@dataclass
class Visit:
    port: int
    berth_type: int
    start: int
    end: int
    speed: float | None          # knots on the leg to the next port


@dataclass
class SolveResult:
    report: SolveReport
    columns: list[Column]        # one per ship, empty when no incumbent
    graph: VoyageGraph
    cut_pool: list[Cut]
    certificate: str = ""

    @property
    def cost(self) -> float:
        return self.report.z

    def schedule(self) -> dict[int, list[Visit]]:
        inst = self.graph.instance
        out = {}
        for col in self.columns:
            rows = []
            for j, ((p, k, t), h) in enumerate(zip(col.visits, col.handling)):
                sp = inst.speeds.levels[col.speeds[j]] if j < len(col.speeds) else None
                rows.append(Visit(p, k, t, t + h, sp))
            out[col.ship] = rows
        return out


# -----------------------------------------------------------------------------
# branching

def positive_columns(columns, x, tol: float = LAMBDA_TOL):
    return [(c, float(v)) for c, v in zip(columns, x) if v > tol and not c.artificial]


def is_integral(columns, x, tol: float = LAMBDA_TOL) -> bool:
    """True when every ship's positive columns share one node sequence."""
    seen: dict[int, tuple] = {}
    for col, _ in positive_columns(columns, x, tol):
        if seen.setdefault(col.ship, col.nodes) != col.nodes:
            return False
    return True


def select_branch_candidate(columns, x, tol: float = LAMBDA_TOL) -> Candidate:
    """Pick the (ship, port) whose weighted berthing times spread the most.

    Falls back to splitting berth types when all time deviations vanish.
    """
    if is_integral(columns, x, tol):
        raise BranchingError("solution is integral, nothing to branch on")
    stats: dict[tuple[int, int], list[tuple[float, int, int]]] = {}
    for col, lam in positive_columns(columns, x, tol):
        for p, k, t in col.visits:
            stats.setdefault((col.ship, p), []).append((lam, t, k))
    best = None
    for key in sorted(stats):
        w = np.array([s[0] for s in stats[key]])
        t = np.array([s[1] for s in stats[key]], dtype=float)
        mean = float(w @ t / w.sum())
        std = float(math.sqrt(max(0.0, w @ (t - mean) ** 2 / w.sum())))
        if std > STD_TOL and (best is None or std > best.spread + 1e-12):
            best = Candidate(key[0], key[1], "time", mean, std)
    if best is not None:
        return best
    for key in sorted(stats):
        by_type: dict[int, float] = {}
        for lam, _, k in stats[key]:
            by_type[k] = by_type.get(k, 0.0) + lam
        if len(by_type) < 2:
            continue
        frag = 1.0 - max(by_type.values()) / sum(by_type.values())
        if best is None or frag > best.spread + 1e-12:
            used = sorted(by_type)
            best = Candidate(key[0], key[1], "type", frozenset(used[:len(used) // 2]), frag)
    if best is None:
        raise BranchingError("fractional solution without a time or type split")
    return best


def branch(node: BnbNode, cand: Candidate, ids) -> tuple[BnbNode, BnbNode]:
    if cand.kind == "time":
        t = math.floor(cand.value + 1e-9)
        left = BranchConstraint(cand.ship, cand.port, "le", t)
        right = BranchConstraint(cand.ship, cand.port, "ge", t + 1)
    else:
        left = BranchConstraint(cand.ship, cand.port, "in", cand.value)
        right = BranchConstraint(cand.ship, cand.port, "out", cand.value)
    return tuple(BnbNode(next(ids), node.id, node.depth + 1, node.constraints + (c,), node.bound)
                 for c in (left, right))


# -----------------------------------------------------------------------------
# tree search

def _base_masks(graph: VoyageGraph, blocked) -> dict[int, np.ndarray]:
    """Per-ship node masks that drop berthings hitting fully blocked cells."""
    if not blocked:
        return {}
    full = np.zeros(graph.n_nodes, dtype=bool)
    for (p, k, t), n in blocked.items():
        if (p, k) in graph.group_window and n >= graph.capacity[p, k]:
            s, e = graph.group_window[p, k]
            if s <= t < e:
                full[graph.node_id(p, k, t)] = True
    masks = {}
    for i, arcs in enumerate(graph.ships):
        m = np.ones(graph.n_nodes, dtype=bool)
        for layer in arcs.layers:
            for v in layer.nodes:
                k = int(graph.node_type[v])
                h = layer.call.handling[k]
                if full[v:v + h].any():
                    m[v] = False
        masks[i] = m
    return masks


def _node_masks(graph: VoyageGraph, node: BnbNode, base: dict[int, np.ndarray]):
    masks = {i: m.copy() for i, m in base.items()}
    for c in node.constraints:
        m = masks.get(c.ship)
        if m is None:
            m = masks[c.ship] = np.ones(graph.n_nodes, dtype=bool)
        arcs = graph.ships[c.ship]
        layer = arcs.layers[arcs.layer_position(c.port)]
        for v in layer.nodes:
            if not c.admits(int(graph.node_type[v]), int(graph.node_time[v])):
                m[v] = False
    return masks or None


class _Search:
    def __init__(self, instance: Instance, options: SolveOptions, blocked=None):
        self.start = time.perf_counter()
        self.options = options
        self.graph = build_graph(instance)
        self.blocked = dict(blocked or {})
        self.master = MasterProblem(self.graph, self.blocked)
        self.base = _base_masks(self.graph, self.blocked)
        self.stats = CGStats()
        self.times = {"rmp": 0.0, "pricing": 0.0, "separation": 0.0, "branching": 0.0, "final_mip": 0.0}
        self.best = math.inf
        self.best_cols: list[Column] = []
        self.nodes = 0
        self.root_lb = -math.inf

    @property
    def deadline(self) -> float:
        return self.start + self.options.time_limit

    def seed(self):
        for col in seed_columns(self.graph):
            if self.base and not all(self.base[col.ship][v] for v in col.nodes):
                continue
            self.master.add_column(col)

    def prune_level(self) -> float:
        return self.best - 1e-9 * max(1.0, abs(self.best))

    def evaluate(self, node: BnbNode):
        """Bound a node.  Returns (status, solution) with status infeasible/timeout/done."""
        masks = _node_masks(self.graph, node, self.base)
        self.master.set_mask(node.admits)
        cut_here = (self.options.cut_policy == "all"
                    or (self.options.cut_policy == "root" and node.depth == 0))
        rounds = 0
        while True:
            res = column_generation(self.master, masks, self.stats, self.deadline)
            if res.status == "infeasible":
                return "infeasible", None
            sol = res.solution
            if self.master.artificial_weight(sol.x) > LAMBDA_TOL:
                if res.status == "timeout":
                    return "timeout", sol
                return "infeasible", None
            if res.status == "timeout":
                return "timeout", sol
            if (not cut_here or rounds >= self.options.max_cut_rounds
                    or sol.objective >= self.prune_level()):
                return "done", sol
            t0 = time.perf_counter()
            cuts = separate_cuts(sol.x, self.master.columns, self.graph,
                                 rhs_fn=self.master.cut_rhs, known=self.master.cut_keys)
            for cut in cuts:
                self.master.add_cut(cut)
            self.times["separation"] += time.perf_counter() - t0
            if not cuts:
                return "done", sol
            rounds += 1

    def update_incumbent(self, sol) -> None:
        cols = [c for c, _ in positive_columns(self.master.columns, sol.x)]
        by_ship = {}
        for c in cols:
            by_ship.setdefault(c.ship, c)
        cost = sum(c.cost for c in by_ship.values())
        if cost < self.best:
            self.best = cost
            self.best_cols = [by_ship[i] for i in sorted(by_ship)]

    def run(self) -> SolveResult:
        self.seed()
        ids = itertools.count()
        root = BnbNode(next(ids), None, 0, (), -math.inf)
        heap = [(-math.inf, 0, root.id, root)]
        open_bounds = lambda: [h[0] for h in heap]
        timed_out = False
        certificate = ""
        while heap:
            bound, _, _, node = heapq.heappop(heap)
            if bound >= self.prune_level():
                continue
            if time.perf_counter() > self.deadline:
                heapq.heappush(heap, (bound, -node.depth, node.id, node))
                timed_out = True
                break
            status, sol = self.evaluate(node)
            self.nodes += 1
            if status == "timeout":
                heapq.heappush(heap, (bound, -node.depth, node.id, node))
                timed_out = True
                break
            if status == "infeasible":
                node.status = "infeasible"
                if node.depth == 0:
                    certificate = self._certificate()
                continue
            node.bound = max(node.bound, sol.objective)
            if node.depth == 0:
                self.root_lb = node.bound
            if node.bound >= self.prune_level():
                node.status = "pruned"
                continue
            t0 = time.perf_counter()
            if is_integral(self.master.columns, sol.x):
                self.update_incumbent(sol)
                node.status = "integral"
                self.times["branching"] += time.perf_counter() - t0
                continue
            cand = select_branch_candidate(self.master.columns, sol.x)
            for child in branch(node, cand, ids):
                if child.consistent(self.graph):
                    heapq.heappush(heap, (child.bound, -child.depth, child.id, child))
            node.status = "branched"
            self.times["branching"] += time.perf_counter() - t0
        if timed_out:
            self.final_mip()
            lb = min(open_bounds() + [self.best])
        else:
            lb = self.best
        return self.finish(lb, timed_out, certificate)

    def final_mip(self) -> None:
        """Integer program over every pooled column with the leftover budget."""
        t0 = time.perf_counter()
        cols = [c for c in self.master.columns if not c.artificial
                and (not self.base or all(self.base[c.ship][v] for v in c.nodes))]
        lp = LinearProgram()
        for c in cols:
            lp.add_var(c.cost, 0.0, 1.0)
        g = self.graph
        for i in range(len(g.ships)):
            lp.add_row({j: 1.0 for j, c in enumerate(cols) if c.ship == i}, EQ, 1.0)
        cells: dict[tuple, dict[int, float]] = {}
        for j, c in enumerate(cols):
            for cell in c.footprint():
                cells.setdefault(cell, {})[j] = 1.0
        for cell in sorted(cells):
            lp.add_row(cells[cell], LE, self.master.residual(*cell))
        for cut in self.master.cuts:
            terms = {j: 1.0 for j, c in enumerate(cols) if cut.coefficient(c)}
            if terms:
                lp.add_row(terms, LE, cut.rhs)
        budget = self.options.final_mip_fraction * self.options.time_limit
        inc = None
        if self.best_cols:
            x0 = np.array([1.0 if c in self.best_cols else 0.0 for c in cols])
            inc = (self.best, x0)
        res = branch_and_bound_binary(lp, range(len(cols)), budget, incumbent=inc)
        if res.x is not None and res.objective < self.best:
            chosen = [c for c, v in zip(cols, res.x) if v > 0.5]
            self.best = sum(c.cost for c in chosen)
            self.best_cols = sorted(chosen, key=lambda c: c.ship)
        self.times["final_mip"] += time.perf_counter() - t0

    def _certificate(self) -> str:
        from .graph import shortest_path
        for i in range(len(self.graph.ships)):
            if shortest_path(self.graph, i, None, self.base.get(i)) is None:
                return f"ship {self.graph.instance.ships[i].id} has no voyage avoiding blocked berths"
        return "the ships cannot share the berth capacity (artificial columns remain at convergence)"

    def finish(self, lb: float, timed_out: bool, certificate: str) -> SolveResult:
        wall = time.perf_counter() - self.start
        self.times["rmp"] = self.stats.rmp_time
        self.times["pricing"] = self.stats.pricing_time
        if math.isfinite(self.best):
            status = FEASIBLE if timed_out and lb < self.prune_level() else OPTIMAL
            if status == OPTIMAL:
                lb = self.best
        elif timed_out:
            status = TIMEOUT
        else:
            status = INFEASIBLE
            lb = math.inf
        report = SolveReport(status, lb, self.best, self.root_lb, self.nodes, self.stats.iterations,
                             sum(1 for c in self.master.columns if not c.artificial),
                             len(self.master.cuts), wall, dict(self.times))
        return SolveResult(report, list(self.best_cols), self.graph, list(self.master.cuts), certificate)


def solve(instance: Instance, options: SolveOptions | None = None, blocked=None) -> SolveResult:
    """Solve to optimality or until the time limit.

    ``blocked`` maps (port index, berth type index, hour) to berths already
    taken by frozen schedules.
    """
    return _Search(instance, options or SolveOptions(), blocked).run()


def root_bound(instance: Instance, cut_policy: str = "none", max_cut_rounds: int = 20):
    """Converged root relaxation value (with optional cut rounds) and the search state."""
    s = _Search(instance, SolveOptions(cut_policy=cut_policy, time_limit=1e9,
                                       max_cut_rounds=max_cut_rounds))
    s.seed()
    status, sol = s.evaluate(BnbNode(0, None, 0, (), -math.inf))
    return (sol.objective if status == "done" else math.inf), s


# -----------------------------------------------------------------------------
# plan export

def assign_berths(visits) -> list[int]:
    """Greedy first-free-berth indices for (port, type, start, end, key) intervals."""
    order = sorted(range(len(visits)), key=lambda i: (visits[i][0], visits[i][1], visits[i][2], visits[i][4]))
    free_at: dict[tuple[int, int], list[int]] = {}
    out = [0] * len(visits)
    for i in order:
        p, k, s, e, _ = visits[i]
        berths = free_at.setdefault((p, k), [])
        for b, until in enumerate(berths):
            if until <= s:
                berths[b] = e
                out[i] = b
                break
        else:
            berths.append(e)
            out[i] = len(berths) - 1
    return out


def plan_rows(result: SolveResult) -> list[dict]:
    """Gantt rows: ship, port, berth type, berth index, start, end, speed to next port."""
    inst = result.graph.instance
    flat = []
    for ship, visits in sorted(result.schedule().items()):
        for v in visits:
            flat.append((ship, v))
    idx = assign_berths([(v.port, v.berth_type, v.start, v.end, s) for s, v in flat])
    rows = []
    for (ship, v), b in zip(flat, idx):
        port = inst.ports[v.port]
        rows.append({"ship": inst.ships[ship].id, "port": port.id,
                     "berth_type": port.berth_types[v.berth_type].id, "berth_index_within_type": b,
                     "start": v.start, "end": v.end,
                     "speed_to_next_knots": "" if v.speed is None else f"{v.speed:.1f}"})
    return rows
