"""Voyage graph: (port, berth type, time) nodes shared by all ships.

Each ship only sees its own arcs.  Arcs between two consecutive route calls
are stored as a dense cost matrix (``inf`` where no arc exists), which keeps
the pricing sweep a handful of numpy reductions per leg.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Instance, PortCall, Ship, fuel_per_distance, travel_hours

SOURCE = -1
SINK = -2


class InfeasibleShipError(ValueError):
    pass


@dataclass
class Layer:
    """Nodes a ship may berth at for one call of its route, ordered by (time, type)."""

    port: int
    call: PortCall
    nodes: np.ndarray
    entry_cost: np.ndarray   # handling + delay incurred when berthing at the node

    def __post_init__(self):
        self.position = {int(v): q for q, v in enumerate(self.nodes)}


@dataclass
class ShipArcs:
    ship: Ship
    layers: list[Layer]
    legs: list[np.ndarray]        # arc cost incl. the head node's entry cost
    leg_speed: list[np.ndarray]   # speed level index of the retained arc, -1 if none
    leg_all: list[np.ndarray] | None = None   # (u, v, speed) costs when speeds are not pruned

    def layer_position(self, port: int) -> int | None:
        for j, layer in enumerate(self.layers):
            if layer.port == port:
                return j
        return None

    def n_arcs(self) -> int:
        n = len(self.layers[0].nodes) + len(self.layers[-1].nodes)
        if self.leg_all is not None:
            return n + sum(int(np.isfinite(c).sum()) for c in self.leg_all)
        return n + sum(int(np.isfinite(c).sum()) for c in self.legs)


@dataclass
class ConflictSet:
    ship: int
    port: int
    berth_type: int
    time: int
    nodes: tuple[int, ...]

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)


@dataclass
class PathResult:
    ship: int
    nodes: tuple[int, ...]
    speeds: tuple[int, ...]
    cost: float      # objective cost of the voyage
    weight: float    # cost plus node weight adjustments


class VoyageGraph:
    def __init__(self, instance: Instance, prune_speeds: bool = True):
        self.instance = instance
        self.prune_speeds = prune_speeds
        pidx = instance.port_index
        self.group_base: dict[tuple[int, int], int] = {}
        self.group_window: dict[tuple[int, int], tuple[int, int]] = {}
        port, btype, time = [], [], []
        for p, prt in enumerate(instance.ports):
            for k, bt in enumerate(prt.berth_types):
                self.group_base[p, k] = len(time)
                self.group_window[p, k] = (bt.open, bt.close)
                for t in range(bt.open, bt.close):
                    port.append(p)
                    btype.append(k)
                    time.append(t)
        self.node_port = np.array(port, dtype=int)
        self.node_type = np.array(btype, dtype=int)
        self.node_time = np.array(time, dtype=int)
        self.capacity = {(p, k): bt.count for p, prt in enumerate(instance.ports)
                         for k, bt in enumerate(prt.berth_types)}
        self.ships = [self._ship_arcs(i, s, pidx) for i, s in enumerate(instance.ships)]

    @property
    def n_nodes(self) -> int:
        return len(self.node_time)

    def node_id(self, port: int, berth_type: int, time: int) -> int:
        s, e = self.group_window[port, berth_type]
        if not s <= time < e:
            raise ValueError(f"time {time} outside window [{s}, {e}) of ({port}, {berth_type})")
        return self.group_base[port, berth_type] + time - s

    def theta(self, node: int) -> int:
        return int(self.node_time[node])

    def group_nodes(self, port: int, berth_type: int) -> np.ndarray:
        s, e = self.group_window[port, berth_type]
        base = self.group_base[port, berth_type]
        return np.arange(base, base + e - s)

    def handling(self, ship: int, port: int, berth_type: int) -> int | None:
        arcs = self.ships[ship]
        j = arcs.layer_position(port)
        if j is None:
            return None
        return arcs.layers[j].call.handling[berth_type]

    def _ship_arcs(self, i: int, ship: Ship, pidx: dict[str, int]) -> ShipArcs:
        inst = self.instance
        cw = inst.costs
        layers = []
        for call in ship.calls:
            p = pidx[call.port]
            entries = []
            for k, bt in enumerate(inst.ports[p].berth_types):
                h = call.handling[k]
                for t in range(max(call.start, bt.open), bt.close - h + 1):
                    entries.append((t, k))
            entries.sort()
            if not entries:
                raise InfeasibleShipError(f"ship {ship.id} has no feasible berthing at port {call.port}")
            nodes = np.array([self.node_id(p, k, t) for t, k in entries], dtype=int)
            ts = np.array([t for t, _ in entries], dtype=float)
            hs = np.array([call.handling[k] for _, k in entries], dtype=float)
            entry = cw.handling * hs + cw.delay * np.maximum(0.0, ts + hs - call.eft)
            layers.append(Layer(p, call, nodes, entry))

        speeds = np.array(inst.speeds.levels)
        legs, leg_speed, leg_all = [], [], []
        for a, b in zip(layers, layers[1:]):
            dist = inst.ports[a.port].distances[b.call.port]
            dep = self.node_time[a.nodes] + np.array(
                [a.call.handling[k] for k in self.node_type[a.nodes]])
            tt = np.array([travel_hours(dist, v) for v in speeds])
            fuel = cw.fuel * dist * np.array([fuel_per_distance(ship, v) for v in speeds])
            arrival = dep[:, None, None] + tt[None, None, :]
            wait = self.node_time[b.nodes][None, :, None] - arrival
            cost = np.where(wait >= 0, fuel[None, None, :] + cw.idle * wait, np.inf)
            best = np.argmin(cost, axis=2)
            c = np.take_along_axis(cost, best[:, :, None], axis=2)[:, :, 0] + b.entry_cost[None, :]
            best[~np.isfinite(c)] = -1
            legs.append(c)
            leg_speed.append(best)
            if not self.prune_speeds:
                leg_all.append(cost + b.entry_cost[None, :, None])
        arcs = ShipArcs(ship, layers, legs, leg_speed, leg_all if not self.prune_speeds else None)
        if shortest_path_arcs(arcs, None, None) is None:
            raise InfeasibleShipError(f"ship {ship.id} has no feasible voyage")
        return arcs

    def stats(self) -> dict:
        return {"nodes": self.n_nodes + 2,
                "arcs": {a.ship.id: a.n_arcs() for a in self.ships}}

    def visits(self, nodes) -> tuple[tuple[int, int, int], ...]:
        return tuple((int(self.node_port[v]), int(self.node_type[v]), int(self.node_time[v]))
                     for v in nodes)

    def path_cost(self, ship: int, nodes) -> float:
        arcs = self.ships[ship]
        pos = [layer.position[int(v)] for layer, v in zip(arcs.layers, nodes)]
        total = float(arcs.layers[0].entry_cost[pos[0]])
        for j, c in enumerate(arcs.legs):
            total += float(c[pos[j], pos[j + 1]])
        return total


def build_graph(instance: Instance, prune_speeds: bool = True) -> VoyageGraph:
    return VoyageGraph(instance, prune_speeds=prune_speeds)


def conflict_set(graph: VoyageGraph, ship: int, port: int, berth_type: int, time: int) -> ConflictSet:
    s, e = graph.group_window[port, berth_type]
    if not s <= time < e:
        raise ValueError(f"time {time} outside operating window [{s}, {e})")
    h = graph.handling(ship, port, berth_type)
    if h is None:
        return ConflictSet(ship, port, berth_type, time, ())
    lo, hi = max(time - h + 1, s), min(time, e)
    base = graph.group_base[port, berth_type]
    return ConflictSet(ship, port, berth_type, time, tuple(range(base + lo - s, base + hi - s + 1)))


def shortest_path_arcs(arcs: ShipArcs, node_weights, allowed):
    layers = arcs.layers
    dist = layers[0].entry_cost.copy()
    if node_weights is not None:
        dist = dist + node_weights[layers[0].nodes]
    if allowed is not None:
        dist[~allowed[layers[0].nodes]] = np.inf
    preds = []
    for j, c in enumerate(arcs.legs):
        nxt = layers[j + 1].nodes
        tot = dist[:, None] + c
        pred = np.argmin(tot, axis=0)
        dist = tot[pred, np.arange(len(nxt))]
        if node_weights is not None:
            dist = dist + node_weights[nxt]
        if allowed is not None:
            dist[~allowed[nxt]] = np.inf
        preds.append(pred)
    last = int(np.argmin(dist))
    if not np.isfinite(dist[last]):
        return None
    pos = [last]
    for pred in reversed(preds):
        pos.append(int(pred[pos[-1]]))
    pos.reverse()
    nodes = tuple(int(layer.nodes[q]) for layer, q in zip(layers, pos))
    speeds = tuple(int(arcs.leg_speed[j][pos[j], pos[j + 1]]) for j in range(len(arcs.legs)))
    cost = float(layers[0].entry_cost[pos[0]])
    for j, c in enumerate(arcs.legs):
        cost += float(c[pos[j], pos[j + 1]])
    return nodes, speeds, cost, float(dist[last])


def shortest_path(graph: VoyageGraph, ship: int, node_weights=None, allowed=None) -> PathResult | None:
    """Minimum-weight source-to-sink voyage for ``ship``.

    ``node_weights`` is added once per visited node; ``allowed`` is a boolean
    node mask.  Returns ``None`` when no voyage survives the mask.
    """
    res = shortest_path_arcs(graph.ships[ship], node_weights, allowed)
    if res is None:
        return None
    nodes, speeds, cost, weight = res
    return PathResult(ship, nodes, speeds, cost, weight)
