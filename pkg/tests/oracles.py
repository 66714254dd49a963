"""Reference implementations used only by the tests."""
import math

import numpy as np


def tableau_simplex(c, A, senses, b, ub=None):
    """Dense two-phase tableau simplex with Bland's rule for min c.x, x >= 0.

    ``ub`` entries become explicit rows.  Returns (status, objective).
    Kept deliberately naive so that it shares nothing with the solver under test.
    """
    c = np.asarray(c, float)
    A = np.asarray(A, float)
    b = np.asarray(b, float)
    senses = list(senses)
    n = len(c)
    if ub is not None:
        for j, u in enumerate(ub):
            if math.isfinite(u):
                row = np.zeros(n)
                row[j] = 1.0
                A = np.vstack([A, row])
                b = np.append(b, u)
                senses.append("<=")
    m = len(b)
    # flip rows so every rhs is >= 0
    for i in range(m):
        if b[i] < 0:
            A[i] = -A[i]
            b[i] = -b[i]
            senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]
    cols = [A]
    slack_names = []
    for i, s in enumerate(senses):
        if s == "=":
            continue
        e = np.zeros((m, 1))
        e[i] = 1.0 if s == "<=" else -1.0
        cols.append(e)
        slack_names.append(i)
    T = np.hstack(cols)
    n_struct = T.shape[1]
    T = np.hstack([T, np.eye(m)])
    basis = list(range(n_struct, n_struct + m))
    rhs = b.copy()

    def pivot(r, q):
        nonlocal rhs
        piv = T[r, q]
        T[r] /= piv
        rhs[r] /= piv
        for i in range(m):
            if i != r and T[i, q] != 0:
                f = T[i, q]
                T[i] -= f * T[r]
                rhs[i] -= f * rhs[r]
        basis[r] = q

    def run(cost, allowed):
        while True:
            cb = cost[basis]
            d = cost - cb @ T
            q = next((j for j in range(T.shape[1]) if allowed[j] and d[j] < -1e-9), None)
            if q is None:
                return "optimal"
            col = T[:, q]
            rows = [i for i in range(m) if col[i] > 1e-9]
            if not rows:
                return "unbounded"
            ratios = [rhs[i] / col[i] for i in rows]
            best = min(ratios)
            r = min((basis[i], i) for i, v in zip(rows, ratios) if v <= best + 1e-12)[1]
            pivot(r, q)

    total = T.shape[1]
    phase1 = np.zeros(total)
    phase1[n_struct:] = 1.0
    run(phase1, [True] * total)
    if phase1[basis] @ rhs > 1e-7:
        return "infeasible", math.nan
    # drive remaining artificials out where possible
    for r in range(m):
        if basis[r] >= n_struct:
            q = next((j for j in range(n_struct) if abs(T[r, j]) > 1e-9), None)
            if q is not None:
                pivot(r, q)
    cost = np.zeros(total)
    cost[:n] = c
    allowed = [j < n_struct for j in range(total)]
    status = run(cost, allowed)
    if status != "optimal":
        return status, math.nan
    x = np.zeros(total)
    x[basis] = rhs
    return "optimal", float(c @ x[:n])
