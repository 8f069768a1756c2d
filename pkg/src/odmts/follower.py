"""Per-trip follower: lexicographic least-cost route and its shortest-path dual.

A trip's graph has the origin, the destination and every hub as vertices.
Shuttle arcs run origin->hub, hub->destination and origin->destination; bus
arcs are the open legs of the design. Routes minimize the weighted cost ``d``
first and the travel time ``f`` second.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .instance import ArcWeights, Instance, Trip, derived_weights

D_TOL = 1e-9

SHUTTLE = "shuttle"
BUS = "bus"


@dataclass(frozen=True)
class Design:
    """Set of open legs; a leg is a pair of hub positions ``(h, l)``, h != l."""
    n_hubs: int
    open: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        legs = frozenset((int(a), int(b)) for a, b in self.open)
        for a, b in legs:
            if a == b or not (0 <= a < self.n_hubs and 0 <= b < self.n_hubs):
                raise ValueError(f"invalid leg {(a, b)} for {self.n_hubs} hubs")
        object.__setattr__(self, "open", legs)

    @classmethod
    def empty(cls, n_hubs: int) -> "Design":
        return cls(n_hubs)

    @classmethod
    def full(cls, n_hubs: int) -> "Design":
        return cls(n_hubs, frozenset((a, b) for a in range(n_hubs) for b in range(n_hubs) if a != b))

    @classmethod
    def from_vector(cls, n_hubs: int, legs, z) -> "Design":
        return cls(n_hubs, frozenset(leg for leg, x in zip(legs, z) if x > 0.5))

    def vector(self, legs) -> np.ndarray:
        return np.array([1.0 if leg in self.open else 0.0 for leg in legs])

    def matrix(self) -> np.ndarray:
        m = np.zeros((self.n_hubs, self.n_hubs), dtype=bool)
        for a, b in self.open:
            m[a, b] = True
        return m

    def is_balanced(self) -> bool:
        m = self.matrix()
        return bool(np.array_equal(m.sum(axis=0), m.sum(axis=1)))

    @property
    def active_hubs(self) -> frozenset:
        return frozenset(a for a, _ in self.open)

    def __le__(self, other: "Design") -> bool:
        return self.open <= other.open

    def __ge__(self, other: "Design") -> bool:
        return self.open >= other.open

    def sorted_legs(self) -> list:
        return sorted(self.open)


@dataclass(frozen=True)
class TripArcSet:
    origin: int
    destination: int
    shuttle_arcs: tuple  # (i, j) node indices
    bus_arcs: tuple      # every leg (h, l), hub positions


@dataclass(frozen=True)
class RouteSolution:
    trip_id: object
    arcs: tuple          # ((i, j, mode), ...) in travel order, node indices
    used_bus: frozenset  # legs (hub positions)
    used_shuttle: frozenset
    d_value: float
    f_value: float

    @property
    def is_direct(self) -> bool:
        return len(self.arcs) == 1 and self.arcs[0][2] == SHUTTLE

    @property
    def nodes(self) -> tuple:
        return (self.arcs[0][0],) + tuple(a[1] for a in self.arcs)


@dataclass(frozen=True)
class DualSolution:
    """Potentials ``u`` per trip-graph node and ``v`` per leg."""
    trip_id: object
    origin: int
    destination: int
    u: dict
    v: dict

    @property
    def constant(self) -> float:
        return self.u[self.origin] - self.u[self.destination]

    def cut_value(self, design: Design) -> float:
        return self.constant - sum(self.v[leg] for leg in design.open)


@dataclass(frozen=True)
class ChoiceOutcome:
    adopts: bool


def trip_arcs(instance: Instance, trip: Trip) -> TripArcSet:
    return _trip_arcs(instance, trip.origin, trip.destination)


def _trip_arcs(instance: Instance, origin, destination) -> TripArcSet:
    net = instance.network
    o, t = net.index(origin), net.index(destination)
    arcs = []
    for h in net.hub_index:
        if h != o:
            arcs.append((o, h))
    for h in net.hub_index:
        if h != t and (h, t) not in arcs:
            arcs.append((h, t))
    if (o, t) not in arcs:
        arcs.append((o, t))
    return TripArcSet(o, t, tuple(arcs), instance.legs)


class _Graph:
    """Adjacency for one trip under one design."""

    def __init__(self, instance: Instance, trip: Trip, design: Design, w: ArcWeights | None = None):
        w = w or derived_weights(instance, trip)
        arcset = trip_arcs(instance, trip)
        hub_idx = instance.network.hub_index
        self.origin, self.destination = arcset.origin, arcset.destination
        self.out: dict[int, list] = {}
        self.vertices = {self.origin, self.destination, *hub_idx}
        for i, j in arcset.shuttle_arcs:
            self.out.setdefault(i, []).append((j, SHUTTLE, w.shuttle(i, j), float(w.time[i, j]), None))
        for leg in sorted(design.open):
            i, j = hub_idx[leg[0]], hub_idx[leg[1]]
            self.out.setdefault(i, []).append((j, BUS, w.bus(i, j), w.bus_time(i, j), leg))

    def arcs(self):
        for i, lst in self.out.items():
            for j, mode, dw, fw, leg in lst:
                yield i, j, mode, dw, fw, leg


def _label_less(a, b) -> bool:
    """Lexicographic order on labels (d, f, arc-sequence) with tolerance on d and f."""
    if a[0] < b[0] - D_TOL:
        return True
    if a[0] > b[0] + D_TOL:
        return False
    if a[1] < b[1] - D_TOL:
        return True
    if a[1] > b[1] + D_TOL:
        return False
    # shortest arc sequence first, then node order
    return (len(a[2]), a[2]) < (len(b[2]), b[2])


def solve_follower(instance: Instance, trip: Trip, design: Design) -> RouteSolution:
    """Lexicographic minimum route for ``trip`` under ``design``.

    Dijkstra over labels ``(d, f, arcs)``; the order is preserved under arc
    extension, so settled labels are final.
    """
    g = _Graph(instance, trip, design)
    best = {g.origin: (0.0, 0.0, ())}
    settled = set()
    while True:
        cand = None
        for node, lab in best.items():
            if node not in settled and (cand is None or _label_less(lab, best[cand])):
                cand = node
        if cand is None or cand == g.destination:
            break
        settled.add(cand)
        d0, f0, seq0 = best[cand]
        for j, mode, dw, fw, leg in g.out.get(cand, ()):
            if j in settled:
                continue
            arc = (cand, j, mode)
            lab = (d0 + dw, f0 + fw, seq0 + (arc,))
            if j not in best or _label_less(lab, best[j]):
                best[j] = lab
    d, f, seq = best[g.destination]
    hub_pos = {n: k for k, n in enumerate(instance.network.hub_index)}
    used_bus = frozenset((hub_pos[i], hub_pos[j]) for i, j, m in seq if m == BUS)
    used_shuttle = frozenset((i, j) for i, j, m in seq if m == SHUTTLE)
    return RouteSolution(trip.id, seq, used_bus, used_shuttle, d, f)


def solve_follower_bigm(instance: Instance, trip: Trip, design: Design, big_m: float) -> RouteSolution:
    """Route minimizing the scalar ``big_m * d + f`` (linear-programming form)."""
    g = _Graph(instance, trip, design)
    dist = {g.origin: (0.0, 0.0, 0.0, ())}
    settled = set()
    while True:
        pending = [(lab[0], n) for n, lab in dist.items() if n not in settled]
        if not pending:
            break
        _, node = min(pending)
        if node == g.destination:
            break
        settled.add(node)
        key, d0, f0, seq = dist[node]
        for j, mode, dw, fw, _leg in g.out.get(node, ()):
            nk = key + big_m * dw + fw
            if j not in settled and (j not in dist or nk < dist[j][0]):
                dist[j] = (nk, d0 + dw, f0 + fw, seq + ((node, j, mode),))
    _, d, f, seq = dist[g.destination]
    hub_pos = {n: k for k, n in enumerate(instance.network.hub_index)}
    return RouteSolution(trip.id, seq,
                         frozenset((hub_pos[i], hub_pos[j]) for i, j, m in seq if m == BUS),
                         frozenset((i, j) for i, j, m in seq if m == SHUTTLE), d, f)


def distances_to_destination(instance: Instance, trip: Trip, design: Design) -> dict:
    """Shortest d-weighted distance from every trip-graph vertex to the destination."""
    g = _Graph(instance, trip, design)
    rev: dict[int, list] = {}
    for i, j, _m, dw, _fw, _leg in g.arcs():
        rev.setdefault(j, []).append((i, dw))
    dist = {v: np.inf for v in g.vertices}
    dist[g.destination] = 0.0
    todo = set(g.vertices)
    while todo:
        node = min(todo, key=lambda n: (dist[n], n))
        todo.discard(node)
        if dist[node] == np.inf:
            break
        for i, dw in rev.get(node, ()):
            if dist[node] + dw < dist[i]:
                dist[i] = dist[node] + dw
    return dist


def extract_duals(instance: Instance, trip: Trip, design: Design,
                  route: RouteSolution | None = None) -> DualSolution:
    """Dual solution of the trip's shortest-path LP at ``design``.

    ``u`` is the exact d-distance to the destination, the pointwise smallest
    feasible potential; ``v`` takes up the slack of every leg.
    """
    u = distances_to_destination(instance, trip, design)
    unreachable = [n for n, x in u.items() if not np.isfinite(x)]
    if unreachable:
        raise RuntimeError(f"trip {trip.id!r}: node {unreachable[0]} cannot reach destination")
    w = derived_weights(instance, trip)
    hub_idx = instance.network.hub_index
    v = {}
    for leg in instance.legs:
        i, j = hub_idx[leg[0]], hub_idx[leg[1]]
        v[leg] = max(0.0, u[i] - u[j] - w.bus(i, j))
    for leg in design.open:
        v[leg] = 0.0
    arcset = trip_arcs(instance, trip)
    return DualSolution(trip.id, arcset.origin, arcset.destination, dict(u), v)


def dual_violation(instance: Instance, trip: Trip, dual: DualSolution) -> float:
    """Largest violation of the dual feasibility constraints (0 when feasible)."""
    w = derived_weights(instance, trip)
    hub_idx = instance.network.hub_index
    arcset = trip_arcs(instance, trip)
    worst = 0.0
    for leg, vl in dual.v.items():
        i, j = hub_idx[leg[0]], hub_idx[leg[1]]
        worst = max(worst, dual.u[i] - dual.u[j] - vl - w.bus(i, j), -vl)
    for i, j in arcset.shuttle_arcs:
        worst = max(worst, dual.u[i] - dual.u[j] - w.shuttle(i, j))
    worst = max(worst, -min(dual.u.values()))
    return worst


def evaluate_choice(trip: Trip, route: RouteSolution) -> ChoiceOutcome:
    """Adoption under the time-threshold choice model; equality counts as adoption."""
    if not trip.has_choice:
        raise ValueError(f"trip {trip.id!r} has no mode choice")
    return ChoiceOutcome(route.f_value <= trip.alpha * trip.t_cur)


def solve_all(instance: Instance, trips: Iterable[Trip], design: Design, threads: int = 1) -> list:
    trips = list(trips)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda t: solve_follower(instance, t, design), trips))
    return [solve_follower(instance, t, design) for t in trips]
