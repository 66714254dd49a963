"""Problem data for the multi-port berth allocation problem with speed choice.

Times are integer hours on a uniform grid, distances are nautical miles and
speeds are knots.  All types are frozen once built; the solver shares them
freely.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

FORMAT_NAME = "mpbap-instance"
FORMAT_VERSION = 1

# generator constants (see docs/instance_format.md)
GEN_HANDLING = (4, 12)
GEN_DISTANCE = (150, 500)
GEN_CONSUMPTION = (2.0, 4.0)
GEN_DESIGN_SPEED = 16.0
GEN_SPEEDS = (14.0, 19.0, 11)
GEN_EFT_SLACK = (0, 3)


class InstanceError(ValueError):
    """Malformed or inconsistent instance data; ``path`` locates the field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class SpeedGrid:
    levels: tuple[float, ...]

    def __post_init__(self):
        if not self.levels:
            raise InstanceError("speeds", "at least one speed level required")
        if any(v <= 0 for v in self.levels):
            raise InstanceError("speeds", "speed levels must be positive")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise InstanceError("speeds", "speed levels must be strictly increasing")

    @classmethod
    def evenly(cls, low: float, high: float, count: int) -> "SpeedGrid":
        return cls(tuple(float(v) for v in np.linspace(low, high, count)))

    @property
    def hours_per_nm(self) -> tuple[float, ...]:
        return tuple(1.0 / v for v in self.levels)

    def __len__(self):
        return len(self.levels)


@dataclass(frozen=True)
class CostWeights:
    fuel: float = 250.0      # $/ton
    handling: float = 200.0  # $/hour
    delay: float = 300.0     # $/hour past EFT
    idle: float = 200.0      # $/hour waiting before berthing

    def __post_init__(self):
        for name in ("fuel", "handling", "delay", "idle"):
            if getattr(self, name) < 0:
                raise InstanceError(f"costs.{name}", "cost weights must be >= 0")


@dataclass(frozen=True)
class BerthType:
    """``count`` identical berths sharing the operating window [open, close)."""

    id: str
    count: int
    open: int
    close: int


@dataclass(frozen=True)
class Port:
    id: str
    berth_types: tuple[BerthType, ...]
    distances: dict[str, float] = field(default_factory=dict)

    @property
    def n_berths(self) -> int:
        return sum(k.count for k in self.berth_types)


@dataclass(frozen=True)
class PortCall:
    """One scheduled visit: earliest start, expected finish and handling per berth type."""

    port: str
    start: int
    eft: int
    handling: tuple[int, ...]


@dataclass(frozen=True)
class Ship:
    id: str
    design_speed: float
    design_consumption: float
    calls: tuple[PortCall, ...]
    carrier: str = "A"

    @property
    def route(self) -> tuple[str, ...]:
        return tuple(c.port for c in self.calls)

    def call(self, port: str) -> PortCall:
        for c in self.calls:
            if c.port == port:
                return c
        raise KeyError(f"ship {self.id} does not visit port {port}")


def fuel_rate(ship: Ship, speed: float) -> float:
    """Cubic fuel burn in tons/hour at ``speed`` knots."""
    if not speed > 0:
        raise ValueError(f"speed must be positive, got {speed}")
    return (speed / ship.design_speed) ** 3 * ship.design_consumption


def fuel_per_distance(ship: Ship, speed: float) -> float:
    """Fuel burnt per nautical mile (tons/nm) when sailing at ``speed``."""
    return fuel_rate(ship, speed) / speed


def travel_hours(distance: float, speed: float) -> int:
    """Sailing time rounded up to the hour grid."""
    # guard against 7.000000001 style float noise
    return int(math.ceil(distance / speed - 1e-9))


@dataclass(frozen=True)
class Instance:
    ports: tuple[Port, ...]
    ships: tuple[Ship, ...]
    speeds: SpeedGrid
    costs: CostWeights = CostWeights()
    seed: int | None = None
    descriptor: str = ""

    def __post_init__(self):
        validate(self)

    @property
    def port_index(self) -> dict[str, int]:
        return {p.id: i for i, p in enumerate(self.ports)}

    def port(self, port_id: str) -> Port:
        for p in self.ports:
            if p.id == port_id:
                return p
        raise KeyError(port_id)

    def subset(self, ship_ids) -> "Instance":
        keep = set(ship_ids)
        return replace(self, ships=tuple(s for s in self.ships if s.id in keep))

    def split_berth_types(self) -> "Instance":
        """Same instance with every berth type of multiplicity b replaced by b single berths."""
        ports, expand = [], {}
        for p in self.ports:
            types, src = [], []
            for k, bt in enumerate(p.berth_types):
                for j in range(bt.count):
                    types.append(replace(bt, id=f"{bt.id}.{j}", count=1))
                    src.append(k)
            ports.append(replace(p, berth_types=tuple(types)))
            expand[p.id] = src
        ships = tuple(replace(s, calls=tuple(
            replace(c, handling=tuple(c.handling[k] for k in expand[c.port])) for c in s.calls))
            for s in self.ships)
        return replace(self, ports=tuple(ports), ships=ships)

    def with_windows_scaled(self, factor: float) -> "Instance":
        """Stretch every berth-type window end by ``factor`` of its length."""
        ports = []
        for p in self.ports:
            types = tuple(
                replace(k, close=k.open + int(math.ceil((k.close - k.open) * factor - 1e-9)))
                for k in p.berth_types)
            ports.append(replace(p, berth_types=types))
        return replace(self, ports=tuple(ports))


def validate(inst: Instance) -> None:
    seen_ports = set()
    for i, p in enumerate(inst.ports):
        path = f"ports[{i}]"
        if p.id in seen_ports:
            raise InstanceError(path, f"duplicate port id {p.id!r}")
        seen_ports.add(p.id)
        if not p.berth_types:
            raise InstanceError(path, "port has no berth types")
        for j, k in enumerate(p.berth_types):
            if k.count < 1:
                raise InstanceError(f"{path}.berth_types[{j}].count", "must be >= 1")
            if not k.open < k.close:
                raise InstanceError(f"{path}.berth_types[{j}]", "open must be < close")
        for q, d in p.distances.items():
            if not d > 0:
                raise InstanceError(f"{path}.distances.{q}", "distance must be positive")

    ports = {p.id: p for p in inst.ports}
    seen_ships = set()
    for i, s in enumerate(inst.ships):
        path = f"ships[{i}]"
        if s.id in seen_ships:
            raise InstanceError(path, f"duplicate ship id {s.id!r}")
        seen_ships.add(s.id)
        if not s.design_speed > 0 or not s.design_consumption > 0:
            raise InstanceError(path, "design speed and consumption must be positive")
        if not s.calls:
            raise InstanceError(f"{path}.calls", "route must contain at least one port")
        route = s.route
        if len(set(route)) != len(route):
            raise InstanceError(f"{path}.calls", f"ship {s.id} repeats a port")
        for j, c in enumerate(s.calls):
            cpath = f"{path}.calls[{j}]"
            if c.port not in ports:
                raise InstanceError(f"{cpath}.port", f"unknown port {c.port!r}")
            if c.start > c.eft:
                raise InstanceError(cpath, f"ship {s.id} at port {c.port}: start {c.start} > eft {c.eft}")
            port = ports[c.port]
            if len(c.handling) != len(port.berth_types):
                raise InstanceError(f"{cpath}.handling",
                                    f"ship {s.id} needs one handling time per berth type of {c.port}")
            if any(h < 1 for h in c.handling):
                raise InstanceError(f"{cpath}.handling", "handling times must be >= 1")
            if not any(c.start <= k.close - h for k, h in zip(port.berth_types, c.handling)):
                raise InstanceError(cpath, f"ship {s.id} cannot berth at port {c.port} within any window")
        for a, b in zip(route, route[1:]):
            if b not in ports[a].distances:
                raise InstanceError(f"ports[{list(ports).index(a)}].distances",
                                    f"missing distance {a} -> {b} used by ship {s.id}")


# ----------------------------------------------------------------------------
# file I/O

def instance_to_dict(inst: Instance) -> dict:
    c = inst.costs
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "descriptor": inst.descriptor,
        "seed": inst.seed,
        "costs": {"fuel": c.fuel, "handling": c.handling, "delay": c.delay, "idle": c.idle},
        "speeds": list(inst.speeds.levels),
        "ports": [
            {
                "id": p.id,
                "berth_types": [{"id": k.id, "count": k.count, "open": k.open, "close": k.close}
                                for k in p.berth_types],
                "distances": dict(p.distances),
            }
            for p in inst.ports
        ],
        "ships": [
            {
                "id": s.id,
                "carrier": s.carrier,
                "design_speed": s.design_speed,
                "design_consumption": s.design_consumption,
                "calls": [{"port": c.port, "start": c.start, "eft": c.eft, "handling": list(c.handling)}
                          for c in s.calls],
            }
            for s in inst.ships
        ],
    }


def _get(d, key, path, kind=None):
    if not isinstance(d, dict) or key not in d:
        raise InstanceError(f"{path}.{key}" if path else key, "missing field")
    v = d[key]
    if kind is int and (isinstance(v, bool) or not isinstance(v, int)):
        raise InstanceError(f"{path}.{key}" if path else key, "expected an integer")
    if kind is float and (isinstance(v, bool) or not isinstance(v, (int, float))):
        raise InstanceError(f"{path}.{key}" if path else key, "expected a number")
    if kind is list and not isinstance(v, list):
        raise InstanceError(f"{path}.{key}" if path else key, "expected a list")
    return v


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict) or data.get("format") != FORMAT_NAME:
        raise InstanceError("format", f"not an {FORMAT_NAME} document")
    if data.get("version") != FORMAT_VERSION:
        raise InstanceError("version", f"unsupported version {data.get('version')!r}")
    cw = _get(data, "costs", "")
    costs = CostWeights(**{k: float(_get(cw, k, "costs", float))
                           for k in ("fuel", "handling", "delay", "idle")})
    speeds = SpeedGrid(tuple(float(v) for v in _get(data, "speeds", "", list)))
    ports = []
    for i, p in enumerate(_get(data, "ports", "", list)):
        path = f"ports[{i}]"
        types = tuple(
            BerthType(str(_get(k, "id", f"{path}.berth_types[{j}]")),
                      _get(k, "count", f"{path}.berth_types[{j}]", int),
                      _get(k, "open", f"{path}.berth_types[{j}]", int),
                      _get(k, "close", f"{path}.berth_types[{j}]", int))
            for j, k in enumerate(_get(p, "berth_types", path, list)))
        dist = p.get("distances", {})
        if not isinstance(dist, dict):
            raise InstanceError(f"{path}.distances", "expected a mapping")
        ports.append(Port(str(_get(p, "id", path)), types, {str(k): float(v) for k, v in dist.items()}))
    ships = []
    for i, s in enumerate(_get(data, "ships", "", list)):
        path = f"ships[{i}]"
        calls = []
        for j, c in enumerate(_get(s, "calls", path, list)):
            cpath = f"{path}.calls[{j}]"
            handling = _get(c, "handling", cpath, list)
            if any(isinstance(h, bool) or not isinstance(h, int) for h in handling):
                raise InstanceError(f"{cpath}.handling", "expected integers")
            calls.append(PortCall(str(_get(c, "port", cpath)), _get(c, "start", cpath, int),
                                  _get(c, "eft", cpath, int), tuple(handling)))
        ships.append(Ship(str(_get(s, "id", path)), float(_get(s, "design_speed", path, float)),
                          float(_get(s, "design_consumption", path, float)), tuple(calls),
                          str(s.get("carrier", "A"))))
    return Instance(tuple(ports), tuple(ships), speeds, costs,
                    data.get("seed"), str(data.get("descriptor", "")))


def dumps_instance(inst: Instance) -> str:
    return json.dumps(instance_to_dict(inst), indent=2) + "\n"


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(dumps_instance(inst))


def read_instance(path) -> Instance:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InstanceError("<file>", f"malformed JSON in {path}: {exc}") from exc
    return instance_from_dict(data)


# ----------------------------------------------------------------------------
# generator

def descriptor(n_ships: int, berths_per_port: int, n_ports: int, tw: str) -> str:
    return f"{n_ships}-{berths_per_port}-{n_ports}-{'L' if tw == 'loose' else 'T'}"


def generate_instance(n_ships: int, berths_per_port: int, n_ports: int,
                      tw: str = "loose", seed: int = 0,
                      costs: CostWeights = CostWeights()) -> Instance:
    """Seeded random instance: one shared route, one berth type per port.

    Ship timings are drawn first; a greedy list schedule at top speed then
    sizes the tight windows so the instance is always feasible.  Loose windows
    are three times the tight length.
    """
    if min(n_ships, berths_per_port, n_ports) < 1:
        raise ValueError("counts must be >= 1")
    if tw not in ("tight", "loose"):
        raise ValueError(f"tw must be 'tight' or 'loose', got {tw!r}")
    rng = np.random.default_rng(seed)
    speeds = SpeedGrid.evenly(*GEN_SPEEDS)
    vmax = speeds.levels[-1]
    port_ids = [f"P{j + 1}" for j in range(n_ports)]
    dist = [int(rng.integers(GEN_DISTANCE[0], GEN_DISTANCE[1] + 1)) for _ in range(n_ports - 1)]

    spread = 3 * math.ceil(n_ships / berths_per_port) + 1
    handling = rng.integers(GEN_HANDLING[0], GEN_HANDLING[1] + 1, size=(n_ships, n_ports))
    consumption = np.round(rng.uniform(*GEN_CONSUMPTION, size=n_ships), 2)
    start = np.zeros((n_ships, n_ports), dtype=int)
    eft = np.zeros((n_ships, n_ports), dtype=int)
    start[:, 0] = rng.integers(0, spread, size=n_ships)
    eft[:, 0] = start[:, 0] + handling[:, 0] + rng.integers(*GEN_EFT_SLACK, endpoint=True, size=n_ships)
    for j in range(1, n_ports):
        start[:, j] = start[:, j - 1] + handling[:, j - 1] + travel_hours(dist[j - 1], vmax)
        eft[:, j] = (eft[:, j - 1] + travel_hours(dist[j - 1], GEN_DESIGN_SPEED) + handling[:, j]
                     + rng.integers(*GEN_EFT_SLACK, endpoint=True, size=n_ships))

    # greedy schedule, earliest ready ship first, at top speed
    ready = start[:, 0].copy()
    opens, tight_close = [], []
    for j in range(n_ports):
        free = [0] * berths_per_port
        finish = np.zeros(n_ships, dtype=int)
        for i in sorted(range(n_ships), key=lambda i: (ready[i], i)):
            b = min(range(berths_per_port), key=lambda b: (free[b], b))
            t = max(int(ready[i]), free[b])
            finish[i] = t + handling[i, j]
            free[b] = int(finish[i])
        s = int(start[:, j].min())
        opens.append(s)
        tight_close.append(int(max(finish.max(), eft[:, j].max())) + 1)
        if j + 1 < n_ports:
            ready = np.maximum(start[:, j + 1], finish + travel_hours(dist[j], vmax))

    ports = []
    for j, pid in enumerate(port_ids):
        length = tight_close[j] - opens[j]
        close = opens[j] + (3 * length if tw == "loose" else length)
        d = {port_ids[j + 1]: float(dist[j])} if j + 1 < n_ports else {}
        ports.append(Port(pid, (BerthType("K0", berths_per_port, opens[j], close),), d))
    ships = []
    for i in range(n_ships):
        calls = tuple(PortCall(port_ids[j], int(start[i, j]), int(eft[i, j]), (int(handling[i, j]),))
                      for j in range(n_ports))
        ships.append(Ship(f"S{i + 1}", GEN_DESIGN_SPEED, float(consumption[i]), calls))
    return Instance(tuple(ports), tuple(ships), speeds, costs, seed,
                    descriptor(n_ships, berths_per_port, n_ports, tw))
