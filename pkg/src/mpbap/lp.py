"""Bounded-variable revised simplex with row duals and warm starts.

Every row ``a.x (sense) b`` gets a logical variable ``r`` with ``a.x + r = b``;
the sense lives in the bounds of ``r`` (``<=``: r >= 0, ``>=``: r <= 0,
``=``: r = 0).  The all-logical basis is always available, so rows and
columns can be appended to a solved problem and the next solve starts from
the previous basis.  Infeasible starting points are handled by a composite
phase 1 that minimises the sum of bound violations of the basic variables.

Dual convention (minimisation): ``<=`` rows have duals <= 0, ``>=`` rows
duals >= 0, equality rows are free.
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

INF = math.inf

LE, GE, EQ = "<=", ">=", "="

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration-limit"

_BASIC, _AT_LB, _AT_UB, _FREE = 0, 1, 2, 3


@dataclass(frozen=True)
class Tolerances:
    feasibility: float = 1e-7
    optimality: float = 1e-6
    integrality: float = 1e-6
    pivot: float = 1e-9


TOL = Tolerances()


class LinearProgram:
    """Minimise ``c.x`` subject to sparse rows and variable bounds."""

    def __init__(self):
        self.cost: list[float] = []
        self.lb: list[float] = []
        self.ub: list[float] = []
        self.names: list[str] = []
        self.rows: list[tuple[np.ndarray, np.ndarray]] = []
        self.senses: list[str] = []
        self.rhs: list[float] = []
        self.row_names: list[str] = []

    @property
    def n_vars(self) -> int:
        return len(self.cost)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    def add_var(self, cost: float, lb: float = 0.0, ub: float = INF, name: str | None = None) -> int:
        if lb > ub:
            raise ValueError(f"variable bounds [{lb}, {ub}] are empty")
        if not math.isfinite(cost):
            raise ValueError("objective coefficients must be finite")
        self.cost.append(float(cost))
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.names.append(name or f"x{len(self.cost) - 1}")
        return len(self.cost) - 1

    def add_row(self, coeffs, sense: str, rhs: float, name: str | None = None) -> int:
        """``coeffs`` maps variable index to coefficient."""
        if sense not in (LE, GE, EQ):
            raise ValueError(f"unknown sense {sense!r}")
        items = sorted((int(j), float(v)) for j, v in dict(coeffs).items() if v != 0)
        idx = np.array([j for j, _ in items], dtype=int)
        val = np.array([v for _, v in items], dtype=float)
        if len(idx) and (idx.min() < 0 or idx.max() >= self.n_vars):
            raise ValueError("row references an unknown variable")
        if not np.all(np.isfinite(val)) or not math.isfinite(rhs):
            raise ValueError("row coefficients must be finite")
        self.rows.append((idx, val))
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.row_names.append(name or f"r{len(self.rhs) - 1}")
        return len(self.rhs) - 1

    def matrix(self) -> sp.csc_matrix:
        data, ri, ci = [], [], []
        for i, (idx, val) in enumerate(self.rows):
            ri.extend([i] * len(idx))
            ci.extend(idx.tolist())
            data.extend(val.tolist())
        return sp.csc_matrix((data, (ri, ci)), shape=(self.n_rows, self.n_vars))


@dataclass
class Basis:
    head: np.ndarray            # basic variable per row position (j >= 0 structural, ~i logical)
    col_status: np.ndarray
    row_status: np.ndarray


@dataclass
class LpSolution:
    status: str
    x: np.ndarray = field(default_factory=lambda: np.zeros(0))
    duals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reduced_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    objective: float = math.nan
    iterations: int = 0
    basis: Basis | None = None

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL


def _row_bounds(sense: str) -> tuple[float, float]:
    if sense == LE:
        return 0.0, INF
    if sense == GE:
        return -INF, 0.0
    return 0.0, 0.0


def _nonbasic_status(lb: float, ub: float) -> int:
    if lb > -INF:
        return _AT_LB
    if ub < INF:
        return _AT_UB
    return _FREE


class SimplexSolver:
    """Stateful solver; ``add_column``/``add_row``/``set_bounds`` keep the basis."""

    refactor_every = 64
    degenerate_limit = 50
    pricing = "devex"           # or "dantzig"

    def __init__(self, program: LinearProgram | None = None, tol: Tolerances = TOL,
                 max_iterations: int | None = None):
        self.tol = tol
        self.max_iterations = max_iterations
        self.c = np.zeros(0)
        self.lb = np.zeros(0)
        self.ub = np.zeros(0)
        self.rlb = np.zeros(0)
        self.rub = np.zeros(0)
        self.b = np.zeros(0)
        self.senses: list[str] = []
        self._cols: list[tuple[list[int], list[float]]] = []
        self._A = None
        self.col_status = np.zeros(0, dtype=int)
        self.row_status = np.zeros(0, dtype=int)
        self.head = np.zeros(0, dtype=int)
        self.binv = np.zeros((0, 0))
        self.iterations = 0
        if program is not None:
            A = program.matrix().tocsc()
            self._cols = [(A.indices[A.indptr[j]:A.indptr[j + 1]].tolist(),
                           A.data[A.indptr[j]:A.indptr[j + 1]].tolist()) for j in range(program.n_vars)]
            self.c = np.array(program.cost, dtype=float)
            self.lb = np.array(program.lb, dtype=float)
            self.ub = np.array(program.ub, dtype=float)
            self.col_status = np.array([_nonbasic_status(lo, hi) for lo, hi in zip(self.lb, self.ub)],
                                       dtype=int)
            bounds = [_row_bounds(sense) for sense in program.senses]
            self.rlb = np.array([lo for lo, _ in bounds], dtype=float)
            self.rub = np.array([hi for _, hi in bounds], dtype=float)
            self.b = np.array(program.rhs, dtype=float)
            self.senses = list(program.senses)
            self.head = np.array([~i for i in range(program.n_rows)], dtype=int)
            self.row_status = np.full(program.n_rows, _BASIC, dtype=int)
            self.binv = np.eye(program.n_rows)

    # -- problem modification ------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def m(self) -> int:
        return len(self.b)

    def _append_row_bounds(self, sense, rhs):
        lo, hi = _row_bounds(sense)
        self.rlb = np.append(self.rlb, lo)
        self.rub = np.append(self.rub, hi)
        self.b = np.append(self.b, float(rhs))
        self.senses.append(sense)

    def add_column(self, cost, rows, vals, lb=0.0, ub=INF) -> int:
        rows = [int(r) for r in rows]
        vals = [float(v) for v in vals]
        self._cols.append((rows, vals))
        self.c = np.append(self.c, float(cost))
        self.lb = np.append(self.lb, float(lb))
        self.ub = np.append(self.ub, float(ub))
        self.col_status = np.append(self.col_status, _nonbasic_status(lb, ub))
        self._A = None
        return self.n - 1

    def add_row(self, coeffs, sense, rhs) -> int:
        """Append a row over existing columns; its logical enters the basis."""
        coeffs = {int(j): float(v) for j, v in dict(coeffs).items() if v != 0}
        i = self.m
        for j, v in coeffs.items():
            self._cols[j][0].append(i)
            self._cols[j][1].append(v)
        self._append_row_bounds(sense, rhs)
        m = i
        r = np.array([coeffs.get(int(h), 0.0) if h >= 0 else 0.0 for h in self.head])
        binv = np.zeros((m + 1, m + 1))
        binv[:m, :m] = self.binv
        binv[m, :m] = -(r @ self.binv) if m else 0.0
        binv[m, m] = 1.0
        self.binv = binv
        self.head = np.append(self.head, ~i)
        self.row_status = np.append(self.row_status, _BASIC)
        self._A = None
        return i

    def set_bounds(self, j: int, lb: float, ub: float) -> None:
        self.lb[j], self.ub[j] = lb, ub
        if self.col_status[j] != _BASIC:
            self.col_status[j] = _nonbasic_status(lb, ub)

    def set_cost(self, j: int, cost: float) -> None:
        self.c[j] = cost

    def set_rhs(self, i: int, rhs: float) -> None:
        self.b[i] = rhs

    @property
    def A(self) -> sp.csc_matrix:
        if self._A is None:
            indptr = [0]
            idx, data = [], []
            for rows, vals in self._cols:
                idx.extend(rows)
                data.extend(vals)
                indptr.append(len(idx))
            self._A = sp.csc_matrix((np.array(data, dtype=float), np.array(idx, dtype=int),
                                     np.array(indptr)), shape=(self.m, self.n))
        return self._A

    def get_basis(self) -> Basis:
        return Basis(self.head.copy(), self.col_status.copy(), self.row_status.copy())

    def set_basis(self, basis: Basis) -> None:
        """Restore a saved basis; rows added since then keep their logicals basic."""
        head = list(basis.head)
        col_status = self.col_status.copy()
        ncol = min(len(basis.col_status), self.n)
        col_status[:ncol] = basis.col_status[:ncol]
        row_status = np.full(self.m, _BASIC, dtype=int)
        nrow = min(len(basis.row_status), self.m)
        row_status[:nrow] = basis.row_status[:nrow]
        head.extend(~i for i in range(len(basis.row_status), self.m))
        for j in range(self.n):
            if col_status[j] != _BASIC:
                col_status[j] = self._fix_status(col_status[j], self.lb[j], self.ub[j])
        self.head = np.array(head, dtype=int)
        self.col_status = col_status
        self.row_status = row_status
        if not self._refactor():
            self._reset_basis()

    @staticmethod
    def _fix_status(st, lb, ub):
        if st == _AT_LB and lb > -INF:
            return st
        if st == _AT_UB and ub < INF:
            return st
        return _nonbasic_status(lb, ub)

    def _reset_basis(self):
        self.head = np.array([~i for i in range(self.m)], dtype=int)
        self.row_status = np.full(self.m, _BASIC, dtype=int)
        for j in range(self.n):
            if self.col_status[j] == _BASIC:
                self.col_status[j] = _nonbasic_status(self.lb[j], self.ub[j])
        self.binv = np.eye(self.m)

    # -- internals -------------------------------------------------------------
    def _nonbasic_values(self):
        xs = np.zeros(self.n)
        st = self.col_status
        xs[st == _AT_LB] = self.lb[st == _AT_LB]
        xs[st == _AT_UB] = self.ub[st == _AT_UB]
        xr = np.zeros(self.m)
        rs = self.row_status
        xr[rs == _AT_LB] = self.rlb[rs == _AT_LB]
        xr[rs == _AT_UB] = self.rub[rs == _AT_UB]
        return xs, xr

    def _compute_xb(self):
        xs, xr = self._nonbasic_values()
        rhs = self.b - self.A @ xs - xr
        return self.binv @ rhs

    def _column(self, var):
        if var >= 0:
            rows, vals = self._cols[var]
            return np.array(rows, dtype=int), np.array(vals)
        return np.array([~var]), np.array([1.0])

    def _refactor(self) -> bool:
        m = self.m
        if m == 0:
            self.binv = np.zeros((0, 0))
            return True
        ri, ci, data = [], [], []
        for p, var in enumerate(self.head):
            rows, vals = self._column(var)
            ri.extend(rows.tolist())
            ci.extend([p] * len(rows))
            data.extend(vals.tolist())
        B = sp.csc_matrix((data, (ri, ci)), shape=(m, m))
        try:
            binv = spla.splu(B).solve(np.eye(m))
        except RuntimeError:
            return False
        if not np.all(np.isfinite(binv)) or np.abs(B @ binv - np.eye(m)).max() > 1e-6:
            return False
        self.binv = binv
        return True

    def _bounds_of(self, var):
        if var >= 0:
            return self.lb[var], self.ub[var]
        return self.rlb[~var], self.rub[~var]

    # -- main loop ---------------------------------------------------------------
    def solve(self, time_limit: float | None = None) -> LpSolution:
        tol = self.tol
        m, n = self.m, self.n
        A = self.A
        AT = A.T.tocsr()
        if self.head.size != m:
            self._reset_basis()
        if not self._refactor():
            self._reset_basis()
        for j in range(n):
            if self.col_status[j] != _BASIC:
                self.col_status[j] = self._fix_status(self.col_status[j], self.lb[j], self.ub[j])
        is_struct = self.head >= 0
        blb, bub = self._basic_bounds()
        xb = self._compute_xb()
        max_iter = self.max_iterations or 50 * (m + n) + 1000
        start = time.perf_counter()
        since_refactor = 0
        degenerate = 0
        bland = False
        it = 0
        verified = False
        b_saved = None          # right-hand side before the anti-stalling perturbation
        perturbed_once = perturb_now = False
        weights = np.ones(n + m)    # devex reference weights, structurals then logicals
        while True:
            if perturb_now:
                perturb_now = False
                b_saved = self.b.copy()
                self.b = self.b + self._perturbation()
                xb = self._compute_xb()
            if it >= max_iter or (time_limit is not None and time.perf_counter() - start > time_limit):
                self.iterations += it
                return LpSolution(ITERATION_LIMIT, iterations=it)
            ftol = tol.feasibility * (1.0 + np.abs(xb))
            below = xb < blb - ftol
            above = xb > bub + ftol
            phase1 = bool(below.any() or above.any())
            if phase1:
                cb = np.where(below, -1.0, np.where(above, 1.0, 0.0))
                y = cb @ self.binv
                d_col = -(AT @ y)
            else:
                cb = np.where(is_struct, self.c[np.where(is_struct, self.head, 0)], 0.0)
                y = cb @ self.binv
                d_col = self.c - AT @ y
            d_row = -y
            q = self._choose_entering(d_col, d_row, bland, phase1, weights)
            if q is None and b_saved is not None:
                self.b = b_saved
                b_saved = None
                xb = self._compute_xb()
                verified = False
                continue
            if q is None:
                if not verified:
                    # refresh factorisation before declaring the outcome
                    verified = True
                    if self._refactor():
                        xb = self._compute_xb()
                        since_refactor = 0
                        continue
                self.iterations += it
                if phase1:
                    return LpSolution(INFEASIBLE, iterations=it)
                return self._finish(xb, y, d_col, it)
            verified = False
            var, direction = q
            rows, vals = self._column(var)
            alpha = self.binv[:, rows] @ vals
            rate = -direction * alpha
            theta, leave, leave_bound = self._ratio_test(xb, blb, bub, rate, ftol, bland)
            lo_q, hi_q = self._bounds_of(var)
            flip = hi_q - lo_q if (lo_q > -INF and hi_q < INF) else INF
            if flip <= theta:
                theta, leave = flip, None
            if not math.isfinite(theta):
                self.iterations += it
                if phase1:
                    return LpSolution(INFEASIBLE, iterations=it)
                return LpSolution(UNBOUNDED, iterations=it)
            it += 1
            # Bland's rule stays on until a clearly nondegenerate step
            degenerate = degenerate + 1 if theta <= 1e-9 else 0
            if degenerate > self.degenerate_limit and not perturbed_once:
                perturbed_once = perturb_now = True
                degenerate = 0
            elif degenerate > self.degenerate_limit:
                bland = True
            elif theta > 1e-6:
                bland = False
            xb = xb + rate * theta
            newval = self._current_value(var) + direction * theta
            if leave is None:
                self._set_status(var, _AT_UB if direction > 0 else _AT_LB)
                continue
            leaving_var = self.head[leave]
            self._set_status(leaving_var, leave_bound)
            self._set_status(var, _BASIC)
            self.head[leave] = var
            is_struct[leave] = var >= 0
            blb[leave], bub[leave] = lo_q, hi_q
            xb[leave] = newval
            piv = alpha[leave]
            if self.pricing == "devex":
                self._devex_update(weights, var, leaving_var, leave, piv, AT)
            prow = self.binv[leave] / piv
            nz = np.flatnonzero(alpha)
            self.binv[nz] -= alpha[nz, None] * prow
            self.binv[leave] = prow
            since_refactor += 1
            if since_refactor >= self.refactor_every:
                since_refactor = 0
                if not self._refactor():
                    self._reset_basis()
                    is_struct = self.head >= 0
                    blb, bub = self._basic_bounds()
                xb = self._compute_xb()

    def _devex_update(self, weights, var, leaving_var, leave, piv, AT):
        n = self.n
        kq = var if var >= 0 else n + ~var
        kl = leaving_var if leaving_var >= 0 else n + ~leaving_var
        row = self.binv[leave]
        ratio = np.concatenate([AT @ row, row]) / piv
        wq = weights[kq]
        np.maximum(weights, ratio * ratio * wq, out=weights)
        weights[kl] = max(wq / (piv * piv), 1.0)
        if weights.max() > 1e8:
            weights[:] = 1.0

    def _perturbation(self) -> np.ndarray:
        """Small deterministic right-hand side shifts that relax inequality rows."""
        rng = np.random.default_rng(self.m)
        size = 1e-6 * (1.0 + np.abs(self.b)) * rng.uniform(0.5, 1.0, self.m)
        sign = np.where(np.array([s == GE for s in self.senses]), -1.0, 1.0)
        eq = np.array([s == EQ for s in self.senses])
        sign[eq] = rng.choice([-1.0, 1.0], int(eq.sum()))
        return sign * size

    def _basic_bounds(self):
        lo = np.array([self._bounds_of(v)[0] for v in self.head], dtype=float)
        hi = np.array([self._bounds_of(v)[1] for v in self.head], dtype=float)
        return lo, hi

    def _current_value(self, var):
        st = self.col_status[var] if var >= 0 else self.row_status[~var]
        lo, hi = self._bounds_of(var)
        if st == _AT_LB:
            return lo
        if st == _AT_UB:
            return hi
        return 0.0

    def _set_status(self, var, st):
        if var >= 0:
            self.col_status[var] = st
        else:
            self.row_status[~var] = st

    def _choose_entering(self, d_col, d_row, bland, phase1=False, weights=None):
        # reduced costs carry round-off proportional to the cost magnitudes
        if phase1:
            otol = self.tol.optimality
        else:
            otol = self.tol.optimality * np.concatenate([1.0 + np.abs(self.c), 1.0 + np.abs(d_row)])
        d = np.concatenate([d_col, d_row])
        st = np.concatenate([self.col_status, self.row_status])
        lo = np.concatenate([self.lb, self.rlb])
        hi = np.concatenate([self.ub, self.rub])
        movable = lo < hi
        inc = ((st == _AT_LB) | (st == _FREE)) & (d < -otol) & movable
        dec = ((st == _AT_UB) | (st == _FREE)) & (d > otol) & movable
        cand = np.flatnonzero(inc | dec)
        if cand.size == 0:
            return None
        if bland:
            k = int(cand[0])
        else:
            w = 1.0 if weights is None else weights[cand]
            k = int(cand[np.argmax(d[cand] ** 2 / w)])
        direction = 1 if inc[k] else -1
        var = k if k < self.n else ~(k - self.n)
        return var, direction

    def _ratio_test(self, xb, blb, bub, rate, ftol, bland):
        ptol = self.tol.pivot
        dec = rate < -ptol
        inc = rate > ptol
        ratios = np.full(len(xb), INF)
        bound = np.zeros(len(xb), dtype=int)
        # decreasing variables block at lb, or at ub when currently above it
        above = xb > bub + ftol
        below = xb < blb - ftol
        m1 = dec & above
        ratios[m1] = (xb[m1] - bub[m1]) / -rate[m1]
        bound[m1] = _AT_UB
        m2 = dec & ~above & ~below & (blb > -INF)
        ratios[m2] = (xb[m2] - blb[m2]) / -rate[m2]
        bound[m2] = _AT_LB
        m3 = inc & below
        ratios[m3] = (blb[m3] - xb[m3]) / rate[m3]
        bound[m3] = _AT_LB
        m4 = inc & ~above & ~below & (bub < INF)
        ratios[m4] = (bub[m4] - xb[m4]) / rate[m4]
        bound[m4] = _AT_UB
        ratios = np.maximum(ratios, 0.0)
        best = ratios.min() if len(ratios) else INF
        if not math.isfinite(best):
            return INF, None, None
        cands = np.flatnonzero(ratios <= best + 1e-12)
        if bland:
            keys = [(self.head[p] if self.head[p] >= 0 else self.n + ~self.head[p]) for p in cands]
            p = int(cands[int(np.argmin(keys))])
        else:
            p = int(cands[np.argmax(np.abs(rate[cands]))])
        st = bound[p]
        if blb[p] == bub[p]:
            st = _AT_LB
        return best, p, st

    def _finish(self, xb, y, d_col, it) -> LpSolution:
        xs, xr = self._nonbasic_values()
        for p, var in enumerate(self.head):
            if var >= 0:
                xs[var] = xb[p]
        obj = float(self.c @ xs)
        d = d_col.copy()
        d[self.col_status == _BASIC] = 0.0
        return LpSolution(OPTIMAL, xs, y.copy(), d, obj, it, self.get_basis())

    def row_activity(self, x) -> np.ndarray:
        return self.A @ x


class LpBackend(Protocol):
    """Anything that turns a ``LinearProgram`` into an ``LpSolution`` with the same dual signs."""

    def __call__(self, program: LinearProgram) -> LpSolution: ...


def lp_solve(program: LinearProgram, warm_basis: Basis | None = None, tol: Tolerances = TOL,
             max_iterations: int | None = None, pricing: str = "devex",
             backend: LpBackend | None = None) -> LpSolution:
    """One-shot solve.  Incremental work (column generation, cut rounds) uses ``SimplexSolver``."""
    if backend is not None:
        return backend(program)
    solver = SimplexSolver(program, tol, max_iterations)
    solver.pricing = pricing
    if warm_basis is not None:
        solver.set_basis(warm_basis)
    return solver.solve()


# -----------------------------------------------------------------------------
# binary branch and bound

NO_INCUMBENT = "no-incumbent"
FEASIBLE = "feasible"


@dataclass
class MipResult:
    status: str
    x: np.ndarray | None
    objective: float
    bound: float
    nodes: int

    @property
    def gap(self) -> float:
        if self.x is None or not math.isfinite(self.objective):
            return INF
        return (self.objective - self.bound) / max(1.0, abs(self.objective))


def branch_and_bound_binary(program: LinearProgram, binary_vars, time_budget: float = INF,
                            tol: Tolerances = TOL, incumbent: tuple[float, np.ndarray] | None = None
                            ) -> MipResult:
    """Best-first branch and bound over the listed binary variables.

    Branches on the most fractional variable (lowest index on ties).  When
    ``time_budget`` runs out the best incumbent and the open-node bound are
    returned with status ``feasible`` (or ``no-incumbent``).
    """
    start = time.perf_counter()
    binary_vars = sorted(int(j) for j in binary_vars)
    solver = SimplexSolver(program, tol)
    for j in binary_vars:
        solver.set_bounds(j, max(0.0, program.lb[j]), min(1.0, program.ub[j]))
    base = {j: (solver.lb[j], solver.ub[j]) for j in binary_vars}
    best_obj, best_x = (incumbent if incumbent is not None else (INF, None))
    counter = itertools.count()
    heap = [(-INF, 0, next(counter), (), None)]
    nodes = 0
    root = True
    bound = -INF
    while heap:
        if time.perf_counter() - start > time_budget:
            bound = min(heap[0][0], best_obj)
            status = FEASIBLE if best_x is not None else NO_INCUMBENT
            return MipResult(status, best_x, best_obj, bound, nodes)
        parent_bound, negdepth, _, fixes, basis = heapq.heappop(heap)
        if parent_bound >= best_obj - 1e-9 * max(1.0, abs(best_obj)):
            continue
        for j in binary_vars:
            solver.set_bounds(j, *base[j])
        for j, v in fixes:
            solver.set_bounds(j, float(v), float(v))
        if basis is not None:
            solver.set_basis(basis)
        remaining = time_budget - (time.perf_counter() - start)
        sol = solver.solve(time_limit=max(remaining, 0.0) if math.isfinite(remaining) else None)
        if not root:
            nodes += 1
        root = False
        if sol.status == ITERATION_LIMIT:
            heapq.heappush(heap, (parent_bound, negdepth, next(counter), fixes, basis))
            continue
        if sol.status != OPTIMAL:
            continue
        if sol.objective >= best_obj - 1e-9 * max(1.0, abs(best_obj)):
            continue
        xv = sol.x[binary_vars]
        frac = np.abs(xv - np.round(xv))
        if frac.max(initial=0.0) <= tol.integrality:
            best_obj, best_x = sol.objective, sol.x.copy()
            best_x[binary_vars] = np.round(xv)
            continue
        score = np.where(frac > tol.integrality, -np.abs(xv - np.floor(xv) - 0.5), -INF)
        k = int(np.argmax(score))
        j = binary_vars[k]
        for v in (0, 1):
            heapq.heappush(heap, (sol.objective, negdepth - 1, next(counter), fixes + ((j, v),), sol.basis))
    if best_x is None:
        return MipResult(INFEASIBLE, None, INF, INF, nodes)
    return MipResult(OPTIMAL, best_x, best_obj, best_obj, nodes)


# -----------------------------------------------------------------------------
# fixed-format MPS export

def write_mps(program: LinearProgram, path, name: str = "MPBAP") -> None:
    kind = {LE: "L", GE: "G", EQ: "E"}
    lines = [f"NAME          {name}", "ROWS", " N  COST"]
    for rn, s in zip(program.row_names, program.senses):
        lines.append(f" {kind[s]}  {rn}")
    lines.append("COLUMNS")
    A = program.matrix().tocsc()
    for j in range(program.n_vars):
        col = program.names[j]
        entries = [("COST", program.cost[j])] if program.cost[j] else []
        s, e = A.indptr[j], A.indptr[j + 1]
        entries += [(program.row_names[i], v) for i, v in zip(A.indices[s:e], A.data[s:e])]
        for rn, v in entries:
            lines.append(f"    {col:<8}  {rn:<8}  {v:>12.6g}")
    lines.append("RHS")
    for rn, r in zip(program.row_names, program.rhs):
        if r:
            lines.append(f"    RHS       {rn:<8}  {r:>12.6g}")
    lines.append("BOUNDS")
    for j in range(program.n_vars):
        col, lo, hi = program.names[j], program.lb[j], program.ub[j]
        if lo == -INF and hi == INF:
            lines.append(f" FR BND       {col:<8}")
            continue
        if lo == -INF:
            lines.append(f" MI BND       {col:<8}")
        elif lo != 0:
            lines.append(f" LO BND       {col:<8}  {lo:>12.6g}")
        if hi < INF:
            lines.append(f" UP BND       {col:<8}  {hi:>12.6g}")
    lines.append("ENDATA")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
