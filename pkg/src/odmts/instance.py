"""Problem data model: network, trips, economic parameters.

Instances are immutable once built. Matrices are dense numpy arrays indexed
by node order and are marked read-only.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Hashable, Sequence

import numpy as np

INCOME_CLASSES = ("low", "medium", "high")


class InstanceError(ValueError):
    """Raised when instance data violates the schema or a model invariant.

    ``path`` names the offending field, e.g. ``trips[3].origin``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Network:
    nodes: tuple
    hubs: tuple
    time: np.ndarray
    dist: np.ndarray
    coords: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "hubs", tuple(self.hubs))
        object.__setattr__(self, "time", _frozen(self.time))
        object.__setattr__(self, "dist", _frozen(self.dist))
        if self.coords is not None:
            object.__setattr__(self, "coords", _frozen(self.coords))
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(self.nodes)})
        self._validate()

    def _validate(self):
        if len(self._index) != len(self.nodes):
            raise InstanceError("nodes", "duplicate node id")
        if not self.hubs:
            raise InstanceError("hubs", "at least one hub is required")
        if len(set(self.hubs)) != len(self.hubs):
            raise InstanceError("hubs", "duplicate hub id")
        for k, h in enumerate(self.hubs):
            if h not in self._index:
                raise InstanceError(f"hubs[{k}]", f"unknown node {h!r}")
        n = len(self.nodes)
        for name in ("time", "dist"):
            m = getattr(self, name)
            if m.shape != (n, n):
                raise InstanceError(name, f"expected {n}x{n} matrix, got {m.shape}")
            if not np.all(np.isfinite(m)):
                raise InstanceError(name, "non-finite entry")
            bad = np.argwhere(m < 0)
            if len(bad):
                i, j = bad[0]
                raise InstanceError(f"{name}[{i}][{j}]", "negative matrix entry")
            bad = np.flatnonzero(np.diag(m) != 0)
            if len(bad):
                raise InstanceError(f"{name}[{bad[0]}][{bad[0]}]", "diagonal must be zero")
        if self.coords is not None and self.coords.shape != (n, 2):
            raise InstanceError("coords", f"expected {n}x2 array")

    def index(self, node: Hashable) -> int:
        return self._index[node]

    @property
    def hub_index(self) -> tuple[int, ...]:
        """Node indices of the hubs, in hub order."""
        return tuple(self._index[h] for h in self.hubs)

    def is_metric(self, tol: float = 0.0) -> bool:
        return all(_triangle_violation(m) <= tol for m in (self.time, self.dist))


@dataclass(frozen=True)
class Trip:
    id: Hashable
    origin: Hashable
    destination: Hashable
    riders: int = 1
    has_choice: bool = False
    alpha: float | None = None
    t_cur: float | None = None
    income_class: str = "low"


@dataclass(frozen=True)
class EconomicParams:
    theta: float = 0.001
    bus_cost_per_mile: float = 5.44
    shuttle_cost_per_mile: float = 1.61
    fare: float = 2.50
    buses_per_leg: int = 16
    bus_wait: float = 7.5

    def __post_init__(self):
        for name in ("theta", "bus_cost_per_mile", "shuttle_cost_per_mile", "fare",
                     "buses_per_leg", "bus_wait"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                raise InstanceError(f"econ.{name}", "must be a finite number")
            if name == "theta" and not 0.0 <= v <= 1.0:
                raise InstanceError("econ.theta", "theta out of [0,1]")
            if v < 0:
                raise InstanceError(f"econ.{name}", "must be nonnegative")

    @property
    def fare_revenue(self) -> float:
        """Per-rider revenue in objective units, (1 - theta) * fare."""
        return (1.0 - self.theta) * self.fare


@dataclass(frozen=True, eq=False)
class Instance:
    network: Network
    trips: tuple
    econ: EconomicParams = field(default_factory=EconomicParams)

    def __post_init__(self):
        object.__setattr__(self, "trips", tuple(self.trips))
        net = self.network
        seen = set()
        for k, tr in enumerate(self.trips):
            p = f"trips[{k}]"
            if tr.id in seen:
                raise InstanceError(f"{p}.id", f"duplicate trip id {tr.id!r}")
            seen.add(tr.id)
            for attr in ("origin", "destination"):
                if getattr(tr, attr) not in net._index:
                    raise InstanceError(f"{p}.{attr}", f"unknown node {getattr(tr, attr)!r}")
            if tr.origin == tr.destination:
                raise InstanceError(p, "origin equals destination")
            if isinstance(tr.riders, bool) or not isinstance(tr.riders, int) or tr.riders < 1:
                raise InstanceError(f"{p}.riders", "riders must be a positive integer")
            if tr.income_class not in INCOME_CLASSES:
                raise InstanceError(f"{p}.income_class", f"expected one of {INCOME_CLASSES}")
            if tr.has_choice:
                if tr.alpha is None or not tr.alpha >= 1.0:
                    raise InstanceError(f"{p}.alpha", "choice trips need alpha >= 1")
                if tr.t_cur is None or not tr.t_cur > 0:
                    raise InstanceError(f"{p}.t_cur", "choice trips need t_cur > 0")
        object.__setattr__(self, "_trip_index", {tr.id: k for k, tr in enumerate(self.trips)})
        h = len(net.hubs)
        # self-legs are never design variables
        object.__setattr__(self, "legs", tuple((a, b) for a in range(h) for b in range(h) if a != b))

    def trip(self, trip_id) -> Trip:
        return self.trips[self._trip_index[trip_id]]

    @property
    def choice_trips(self) -> tuple:
        return tuple(t for t in self.trips if t.has_choice)

    def leg_nodes(self, leg: tuple[int, int]) -> tuple[int, int]:
        hi = self.network.hub_index
        return hi[leg[0]], hi[leg[1]]

    def leg_investment(self) -> np.ndarray:
        """beta for every leg, in ``legs`` order."""
        e = self.econ
        hi = self.network.hub_index
        d = self.network.dist
        return np.array([(1 - e.theta) * e.bus_cost_per_mile * e.buses_per_leg * d[hi[a], hi[b]]
                         for a, b in self.legs])

    def with_network(self, network: Network) -> "Instance":
        return replace(self, network=network)


@dataclass(frozen=True, eq=False)
class ArcWeights:
    """Objective weights seen by one trip.

    All methods take node indices. ``fare_revenue`` is the per-rider revenue.
    """
    theta: float
    shuttle_cost_per_mile: float
    bus_cost_per_mile: float
    buses_per_leg: float
    bus_wait: float
    time: np.ndarray
    dist: np.ndarray
    fare_revenue: float

    def investment(self, h: int, l: int) -> float:
        return float((1 - self.theta) * self.bus_cost_per_mile * self.buses_per_leg * self.dist[h, l])

    def shuttle(self, i: int, j: int) -> float:
        return float((1 - self.theta) * self.shuttle_cost_per_mile * self.dist[i, j] + self.theta * self.time[i, j])

    def bus(self, i: int, j: int) -> float:
        return float(self.theta * (self.time[i, j] + self.bus_wait))

    def bus_time(self, i: int, j: int) -> float:
        return float(self.time[i, j] + self.bus_wait)


def derived_weights(instance: Instance, trip: Trip | None = None) -> ArcWeights:
    """Weights for the follower of ``trip``.

    The formulas do not depend on the trip; the argument is kept so callers
    can stay trip-oriented.
    """
    e = instance.econ
    return ArcWeights(e.theta, e.shuttle_cost_per_mile, e.bus_cost_per_mile, e.buses_per_leg, e.bus_wait,
                      instance.network.time, instance.network.dist, e.fare_revenue)


def _triangle_violation(m: np.ndarray) -> float:
    # max over (i,k,j) of m_ij - (m_ik + m_kj)
    via = m[:, :, None] + m[None, :, :]
    return float(np.max(m[:, None, :] - via)) if len(m) else 0.0


def _closure(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=float, copy=True)
    while True:
        prev = m.copy()
        for k in range(len(m)):
            np.minimum(m, m[:, k, None] + m[None, k, :], out=m)
        if np.array_equal(m, prev):
            return m


def metricize(network: Network) -> Network:
    """Replace both matrices with their shortest-path closures.

    Floyd-Warshall is repeated until a floating-point fixed point, so the
    result satisfies the triangle inequality exactly and the operation is
    idempotent.
    """
    return Network(network.nodes, network.hubs, _closure(network.time),
                   _closure(network.dist), network.coords)


def metricize_instance(instance: Instance) -> Instance:
    if instance.network.is_metric():
        return instance
    return instance.with_network(metricize(instance.network))


# ---------------------------------------------------------------------------
# JSON I/O
# ---------------------------------------------------------------------------

_ECON_KEYS = ("theta", "bus_cost_per_mile", "shuttle_cost_per_mile", "fare", "buses_per_leg", "bus_wait")


def _require(obj: dict, key: str, path: str):
    if key not in obj:
        raise InstanceError(f"{path}{key}" if path else key, "missing field")
    return obj[key]


def _matrix(value: Any, path: str) -> np.ndarray:
    if not isinstance(value, list) or not all(isinstance(r, list) for r in value):
        raise InstanceError(path, "expected a list of rows")
    for i, row in enumerate(value):
        for j, x in enumerate(row):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise InstanceError(f"{path}[{i}][{j}]", "expected a number")
    try:
        return np.array(value, dtype=float)
    except ValueError:
        raise InstanceError(path, "ragged matrix") from None


def instance_from_dict(data: dict) -> Instance:
    if not isinstance(data, dict):
        raise InstanceError("$", "expected a JSON object")
    nodes = _require(data, "nodes", "")
    hubs = _require(data, "hubs", "")
    if not isinstance(nodes, list) or not isinstance(hubs, list):
        raise InstanceError("nodes" if not isinstance(nodes, list) else "hubs", "expected a list")
    coords = data.get("coords")
    network = Network(nodes, hubs,
                      _matrix(_require(data, "time", ""), "time"),
                      _matrix(_require(data, "dist", ""), "dist"),
                      None if coords is None else _matrix(coords, "coords"))
    econ_raw = _require(data, "econ", "")
    if not isinstance(econ_raw, dict):
        raise InstanceError("econ", "expected an object")
    unknown = set(econ_raw) - set(_ECON_KEYS)
    if unknown:
        raise InstanceError(f"econ.{sorted(unknown)[0]}", "unknown field")
    econ = EconomicParams(**econ_raw)
    if isinstance(econ.buses_per_leg, float) and not econ.buses_per_leg.is_integer():
        raise InstanceError("econ.buses_per_leg", "must be an integer")

    trips = []
    raw_trips = _require(data, "trips", "")
    if not isinstance(raw_trips, list):
        raise InstanceError("trips", "expected a list")
    for k, t in enumerate(raw_trips):
        p = f"trips[{k}]."
        if not isinstance(t, dict):
            raise InstanceError(f"trips[{k}]", "expected an object")
        origin = _require(t, "origin", p)
        dest = _require(t, "destination", p)
        for attr, node in (("origin", origin), ("destination", dest)):
            if node not in network._index:
                raise InstanceError(p + attr, f"unknown node {node!r}")
        has_choice = bool(t.get("has_choice", False))
        t_cur = t.get("t_cur")
        if has_choice and t_cur is None:
            t_cur = float(network.time[network.index(origin), network.index(dest)])
        trips.append(Trip(
            id=t.get("id", k),
            origin=origin,
            destination=dest,
            riders=t.get("riders", 1),
            has_choice=has_choice,
            alpha=t.get("alpha") if has_choice else None,
            t_cur=t_cur if has_choice else None,
            income_class=t.get("income_class", "low"),
        ))
    return Instance(network, trips, econ)


def instance_to_dict(instance: Instance) -> dict:
    net = instance.network
    out = {
        "nodes": list(net.nodes),
        "hubs": list(net.hubs),
        "time": net.time.tolist(),
        "dist": net.dist.tolist(),
        "trips": [],
        "econ": {k: getattr(instance.econ, k) for k in _ECON_KEYS},
    }
    if net.coords is not None:
        out["coords"] = net.coords.tolist()
    for t in instance.trips:
        rec = {"id": t.id, "origin": t.origin, "destination": t.destination,
               "riders": t.riders, "has_choice": t.has_choice,
               "income_class": t.income_class}
        if t.has_choice:
            rec["alpha"] = t.alpha
            rec["t_cur"] = t.t_cur
        out["trips"].append(rec)
    return out


def load_instance(path: str | Path) -> Instance:
    """Read and validate an instance JSON file."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError("$", f"invalid JSON: {exc}") from None
    return instance_from_dict(data)


def dump_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(instance), indent=1) + "\n", encoding="utf-8")


def build_instance(nodes: Sequence, hubs: Sequence, time, dist, trips: Sequence[Trip],
                   econ: EconomicParams | None = None) -> Instance:
    return Instance(Network(nodes, hubs, np.asarray(time, float), np.asarray(dist, float)),
                    tuple(trips), econ or EconomicParams())
