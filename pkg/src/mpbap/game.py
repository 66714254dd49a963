"""Carrier coalitions: characteristic function, Shapley value and equal profit method."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lp import EQ, GE, INF, LE, LinearProgram, lp_solve
from .model import Instance
from .search import OPTIMAL, FEASIBLE, SolveOptions, SolveResult, solve

DEFAULT_SHARES = (("A", 0.5, 1), ("B", 0.25, 2), ("C", 0.25, 3))
WINDOW_EXPANSION = 0.2
STABILITY_TOL = 1e-6


class CoalitionInfeasible(RuntimeError):
    def __init__(self, carrier: str, detail: str = ""):
        super().__init__(f"carrier {carrier} has no feasible schedule {detail}".strip())
        self.carrier = carrier


class DegenerateGame(ValueError):
    pass


@dataclass
class CoalitionGame:
    players: tuple[str, ...]
    values: dict[frozenset, float]

    def __post_init__(self):
        self.values = {frozenset(k): float(v) for k, v in self.values.items()}
        self.values.setdefault(frozenset(), 0.0)
        if self.values[frozenset()] != 0.0:
            raise ValueError("the empty coalition must cost 0")
        for S in self.coalitions():
            if S not in self.values:
                raise ValueError(f"missing value for coalition {''.join(sorted(S))}")

    def coalitions(self):
        for r in range(1, len(self.players) + 1):
            for S in itertools.combinations(self.players, r):
                yield frozenset(S)

    def v(self, S) -> float:
        return self.values[frozenset(S)]

    @property
    def grand(self) -> frozenset:
        return frozenset(self.players)

    def superadditive(self, tol: float = 1e-9) -> bool:
        """Merging two disjoint coalitions never costs more than keeping them apart."""
        for S in self.coalitions():
            for T in self.coalitions():
                if S & T:
                    continue
                if self.v(S | T) > self.v(S) + self.v(T) + tol * max(1.0, abs(self.v(S | T))):
                    return False
        return True

    def in_core(self, x: dict[str, float], tol: float = STABILITY_TOL) -> bool:
        if abs(sum(x.values()) - self.v(self.grand)) > tol * max(1.0, abs(self.v(self.grand))):
            return False
        return all(sum(x[i] for i in S) <= self.v(S) + tol * max(1.0, abs(self.v(S)))
                   for S in self.coalitions())


@dataclass
class Allocation:
    method: str
    costs: dict[str, float]
    standalone: dict[str, float]
    stable: bool
    z: float | None = None

    @property
    def relative_savings(self) -> dict[str, float]:
        return {i: (self.standalone[i] - x) / self.standalone[i] if self.standalone[i] else 0.0
                for i, x in self.costs.items()}

    @property
    def savings_share(self) -> dict[str, float]:
        total = sum(self.standalone.values()) - sum(self.costs.values())
        return {i: (self.standalone[i] - x) / total if total else 0.0 for i, x in self.costs.items()}


@dataclass
class CoreEmpty:
    method: str = "epm"
    detail: str = "no allocation satisfies every coalition constraint"
    stable: bool = False


# -----------------------------------------------------------------------------
# allocations

def shapley(game: CoalitionGame) -> Allocation:
    """Average marginal contribution over all join orders, in exact rational arithmetic."""
    n = len(game.players)
    val = {S: Fraction(v) for S, v in game.values.items()}
    x = {}
    for i in game.players:
        others = [p for p in game.players if p != i]
        acc = Fraction(0)
        for r in range(n):
            w = Fraction(math.factorial(r) * math.factorial(n - r - 1), math.factorial(n))
            for S in itertools.combinations(others, r):
                S = frozenset(S)
                acc += w * (val[S | {i}] - val[S])
        x[i] = float(acc)
    standalone = {i: game.v({i}) for i in game.players}
    return Allocation("shapley", x, standalone, game.in_core(x))


def epm_program(game: CoalitionGame) -> LinearProgram:
    """Variables x_1..x_n then z; pairwise relative-savings gaps, efficiency and stability rows."""
    lp = LinearProgram()
    vi = [game.v({i}) for i in game.players]
    if any(v == 0 for v in vi):
        raise DegenerateGame("a standalone cost of zero leaves relative savings undefined")
    for i in game.players:
        lp.add_var(0.0, 0.0, INF, name=f"x_{i}")
    # the largest pairwise gap is never negative, and a lone player has no pair rows at all
    z = lp.add_var(1.0, 0.0, INF, name="z")
    n = len(game.players)
    for a in range(n):
        for b in range(n):
            if a != b:
                lp.add_row({z: 1.0, a: -1.0 / vi[a], b: 1.0 / vi[b]}, GE, 0.0)
    idx = {p: a for a, p in enumerate(game.players)}
    lp.add_row({a: 1.0 for a in range(n)}, EQ, game.v(game.grand), name="efficiency")
    for S in game.coalitions():
        if S != game.grand:
            lp.add_row({idx[p]: 1.0 for p in S}, LE, game.v(S), name="stab_" + "".join(sorted(S)))
    return lp


def epm(game: CoalitionGame) -> Allocation | CoreEmpty:
    """Core allocation minimising the largest gap between relative savings."""
    sol = lp_solve(epm_program(game))
    if sol.status == "infeasible":
        return CoreEmpty()
    if not sol.optimal:
        raise RuntimeError(f"EPM LP ended with status {sol.status}")
    x = {p: float(sol.x[a]) for a, p in enumerate(game.players)}
    standalone = {i: game.v({i}) for i in game.players}
    return Allocation("epm", x, standalone, game.in_core(x), z=float(sol.x[len(game.players)]))


# -----------------------------------------------------------------------------
# coalition costs from the solver

def assign_carriers(n_ships: int, shares=DEFAULT_SHARES) -> list[str]:
    """Carrier per ship by contiguous index blocks sized by the shares."""
    out = []
    cum = 0.0
    for j, (name, share, _) in enumerate(shares):
        cum += share
        end = n_ships if j == len(shares) - 1 else int(math.floor(cum * n_ships + 0.5))
        out.extend([name] * max(0, end - len(out)))
    return out[:n_ships]


@dataclass
class CarrierSetup:
    carriers: dict[str, str]          # ship id -> carrier
    priorities: dict[str, int]        # carrier -> rank, 1 first

    @classmethod
    def default(cls, instance: Instance, shares=DEFAULT_SHARES) -> "CarrierSetup":
        names = assign_carriers(len(instance.ships), shares)
        used = set(names)
        return cls({s.id: c for s, c in zip(instance.ships, names)},
                   {c: r for c, _, r in shares if c in used})

    @property
    def players(self) -> tuple[str, ...]:
        return tuple(sorted(self.priorities, key=lambda c: (self.priorities[c], c)))

    def ships_of(self, carriers) -> list[str]:
        carriers = set(carriers)
        return [s for s, c in self.carriers.items() if c in carriers]


def _footprint(result: SolveResult) -> dict[tuple[int, int, int], int]:
    out: dict[tuple[int, int, int], int] = {}
    for col in result.columns:
        for cell in col.footprint():
            out[cell] = out.get(cell, 0) + 1
    return out


def _merge(a: dict, b: dict) -> dict:
    out = dict(a)
    for k, v in b.items():
        out[k] = out.get(k, 0) + v
    return out


class CharacteristicFunction:
    """v(S) under sequential priority scheduling, cached by coalition.

    Outside carriers ranked above the coalition's best member are scheduled
    first, one at a time, each seeing earlier schedules as blocked berth
    capacity.  Lower ranked outsiders are ignored.  ``instance`` is used as
    given, so window expansion happens before construction.
    """

    def __init__(self, instance: Instance, setup: CarrierSetup, options: SolveOptions | None = None):
        self.instance = instance
        self.setup = setup
        self.options = options or SolveOptions()
        self._prefix: dict[tuple[str, ...], dict] = {(): {}}
        self.results: dict[frozenset, SolveResult] = {}
        self.errors: dict[frozenset, str] = {}

    def _solve(self, carriers, blocked) -> SolveResult:
        ships = self.setup.ships_of(carriers)
        sub = self.instance.subset(ships)
        res = solve(sub, self.options, blocked)
        if res.report.status not in (OPTIMAL, FEASIBLE):
            raise CoalitionInfeasible("".join(sorted(carriers)), res.certificate)
        return res

    def blocked_before(self, rank: int) -> dict:
        order = [c for c in self.setup.players if self.setup.priorities[c] < rank]
        key = ()
        blocked = {}
        for c in order:
            nxt = key + (c,)
            if nxt not in self._prefix:
                res = self._solve([c], blocked)
                self._prefix[nxt] = _merge(blocked, _footprint(res))
            key, blocked = nxt, self._prefix[nxt]
        return blocked

    def result(self, coalition) -> SolveResult:
        S = frozenset(coalition)
        if S not in self.results:
            rank = min(self.setup.priorities[c] for c in S)
            self.results[S] = self._solve(S, self.blocked_before(rank))
        return self.results[S]

    def __call__(self, coalition) -> float:
        return self.result(coalition).cost

    def game(self) -> CoalitionGame:
        players = self.setup.players
        values = {}
        for r in range(1, len(players) + 1):
            for S in itertools.combinations(players, r):
                values[frozenset(S)] = self(S)
        return CoalitionGame(players, values)


def characteristic_function(instance: Instance, setup: CarrierSetup, coalition,
                            options: SolveOptions | None = None) -> float:
    return CharacteristicFunction(instance, setup, options)(coalition)


def terminal_costs(result: SolveResult) -> dict[str, float]:
    """Handling plus delay cost per port of a solved plan."""
    inst = result.graph.instance
    cw = inst.costs
    out = {p.id: 0.0 for p in inst.ports}
    for col in result.columns:
        ship = inst.ships[col.ship]
        for (p, k, t), h in zip(col.visits, col.handling):
            call = ship.call(inst.ports[p].id)
            out[inst.ports[p].id] += cw.handling * h + cw.delay * max(0, t + h - call.eft)
    return out


@dataclass
class TerminalRow:
    port: str
    standalone: float
    grand: float

    @property
    def savings_pct(self) -> float:
        return 100.0 * (self.standalone - self.grand) / self.standalone if self.standalone else 0.0


def terminal_savings(cf: CharacteristicFunction) -> list[TerminalRow]:
    players = cf.setup.players
    alone: dict[str, float] = {}
    for c in players:
        for port, v in terminal_costs(cf.result({c})).items():
            alone[port] = alone.get(port, 0.0) + v
    grand = terminal_costs(cf.result(players))
    return [TerminalRow(p.id, alone.get(p.id, 0.0), grand.get(p.id, 0.0)) for p in cf.instance.ports]


@dataclass
class GameResult:
    game: CoalitionGame
    shapley: Allocation
    epm: Allocation | CoreEmpty
    terminals: list[TerminalRow] = field(default_factory=list)


def analyse(instance: Instance, setup: CarrierSetup | None = None, options: SolveOptions | None = None,
            expansion: float = WINDOW_EXPANSION) -> GameResult:
    """Full pipeline: widen windows, value every coalition, allocate, compare terminals."""
    inst = instance.with_windows_scaled(1.0 + expansion) if expansion else instance
    setup = setup or CarrierSetup.default(inst)
    cf = CharacteristicFunction(inst, setup, options)
    game = cf.game()
    return GameResult(game, shapley(game), epm(game), terminal_savings(cf))


def game_from_table(values: dict[str, float]) -> CoalitionGame:
    """Game from coalition labels such as ``{"A": 10, "AB": 16}``."""
    players = tuple(sorted({ch for k in values for ch in k}))
    return CoalitionGame(players, {frozenset(k): v for k, v in values.items()})


def random_game(rng: np.random.Generator, n_players: int) -> CoalitionGame:
    players = tuple("ABCDEF"[:n_players])
    values = {}
    for r in range(1, n_players + 1):
        for S in itertools.combinations(players, r):
            values[frozenset(S)] = float(rng.uniform(50, 150) * r ** 0.8)
    return CoalitionGame(players, values)
