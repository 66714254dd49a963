"""Interval valid inequalities for the berth-type master problem.

A cut ``(n, p, k, t1, t2)`` counts ship ``n``'s voyages berthing at (p, k)
anywhere in the union of its conflict sets over [t1, t2], plus every other
ship's voyages berthing in the intersection of its conflict sets at t1 and
t2.  At most ``rhs`` (the berth-type multiplicity) of those can be chosen.

All node sets involved are contiguous time ranges inside V(p, k), so a cut
stores one ``(lo, hi)`` berthing-time range per ship.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .graph import VoyageGraph

VIOLATION_TOL = 1e-6


@dataclass(frozen=True)
class Cut:
    ship: int
    port: int
    berth_type: int
    t1: int
    t2: int
    rhs: float
    ranges: tuple[tuple[int, int] | None, ...]   # berthing-time range per ship

    @property
    def key(self) -> tuple[int, int, int, int, int]:
        return self.ship, self.port, self.berth_type, self.t1, self.t2

    def coefficient(self, column) -> int:
        """Coefficient of a voyage column in the cut row (0 or 1)."""
        if column.artificial:
            return 0
        rng = self.ranges[column.ship]
        if rng is None:
            return 0
        visit = column.visit_at(self.port)
        if visit is None or visit[0] != self.berth_type:
            return 0
        return int(rng[0] <= visit[1] <= rng[1])

    def lhs(self, columns, x) -> float:
        return sum(float(v) * self.coefficient(col) for col, v in zip(columns, x) if v > 1e-12)


def cut_row_coefficient(cut: Cut, column) -> int:
    return cut.coefficient(column)


def make_cut(graph: VoyageGraph, ship: int, port: int, berth_type: int, t1: int, t2: int,
             rhs: float | None = None) -> Cut | None:
    """Build the cut, or ``None`` when no other ship has a nonempty intersection range."""
    s, e = graph.group_window[port, berth_type]
    if not (s <= t1 < t2 < e):
        raise ValueError(f"need {s} <= t1 < t2 < {e}, got t1={t1}, t2={t2}")
    ranges = []
    others = False
    for m in range(len(graph.ships)):
        h = graph.handling(m, port, berth_type)
        if h is None:
            ranges.append(None)
        elif m == ship:
            ranges.append((max(t1 - h + 1, s), t2))
        else:
            lo, hi = max(t2 - h + 1, s), t1
            if lo <= hi:
                ranges.append((lo, hi))
                others = True
            else:
                ranges.append(None)
    if not others or ranges[ship] is None:
        return None
    if rhs is None:
        rhs = graph.capacity[port, berth_type]
    return Cut(ship, port, berth_type, t1, t2, float(rhs), tuple(ranges))


def compute_cut_interval(t1s: int, t2s: int, t3s: int, h_n: int, h_m: int,
                         window: tuple[int, int]) -> tuple[int, int] | None:
    """Times (t1, t2) of the cut built around solution times of ships n and m.

    The conflict slacks are split evenly (rounded up) between widening ship
    n's range and keeping ship m's range wide.  If the window stops ship n's
    range from growing on one side, the unused part goes to the other side.
    Returns ``None`` when the times do not conflict or when t1 >= t2.
    """
    s, e = window
    if not (t1s <= t2s and t1s + h_n > t3s and t2s < t3s + h_m):
        return None
    dx = t1s + h_n - t3s - 1
    dy = t3s + h_m - t2s - 1
    left = math.ceil(dx / 2)
    right = math.ceil(dy / 2)
    over_left = max(0, s - (t1s - left))
    over_right = max(0, (t2s + right) - (e - 1))
    left -= over_left
    right -= over_right
    left = max(0, min(left + over_right, dx, t1s - s))
    right = max(0, min(right + over_left, dy, e - 1 - t2s))
    t1 = min(t1s - left + h_n - 1, e - 1)
    t2 = t2s + right
    if t1 >= t2:
        return None
    return t1, t2


def berthing_times(columns, x, tol: float = 1e-9):
    """times[(p, k, ship)] -> sorted berthing times used by positive columns."""
    times: dict[tuple[int, int, int], set[int]] = {}
    for col, v in zip(columns, x):
        if v <= tol or col.artificial:
            continue
        for p, k, t in col.visits:
            times.setdefault((p, k, col.ship), set()).add(t)
    return {key: sorted(ts) for key, ts in times.items()}


def separate_cuts(x, columns, graph: VoyageGraph, rhs_fn=None, known=frozenset(),
                  tol: float = VIOLATION_TOL) -> list[Cut]:
    """Violated cuts derived from the times used by the LP solution ``x``.

    ``rhs_fn(p, k, t1, t2)`` overrides the right-hand side (used when part
    of the capacity is already taken by frozen schedules).
    """
    times = berthing_times(columns, x)
    active = [(col, v) for col, v in zip(columns, x) if v > 1e-12 and not col.artificial]
    ships = sorted({n for (_, _, n) in times})
    found: dict[tuple, Cut] = {}
    checked = set(known)
    for (p, k) in sorted(graph.group_window):
        window = graph.group_window[p, k]
        for n in ships:
            tn = times.get((p, k, n))
            if not tn:
                continue
            h_n = graph.handling(n, p, k)
            for i, t1s in enumerate(tn):
                for t2s in tn[i:]:
                    for m in ships:
                        if m == n or (p, k, m) not in times:
                            continue
                        h_m = graph.handling(m, p, k)
                        for t3s in times[p, k, m]:
                            iv = compute_cut_interval(t1s, t2s, t3s, h_n, h_m, window)
                            if iv is None:
                                continue
                            key = (n, p, k) + iv
                            if key in checked:
                                continue
                            checked.add(key)
                            rhs = rhs_fn(p, k, *iv) if rhs_fn else None
                            cut = make_cut(graph, n, p, k, iv[0], iv[1], rhs)
                            if cut is None:
                                continue
                            lhs = sum(v * cut.coefficient(col) for col, v in active)
                            if lhs > cut.rhs + tol:
                                found[key] = cut
    return list(found.values())
