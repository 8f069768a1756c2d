"""Trip-duration bounds under design growth or shrinkage, direct-trip
detection, big-M values for the linearized leader, and lifting sets.

The duration bounds divide by theta; with ``theta == 0`` they are undefined
and the functions return ``None`` so callers fall back to plain nogood cuts.
They are also skipped (``None``) for trips that start or end at a hub.
"""
from __future__ import annotations

from dataclasses import dataclass

from .follower import Design, RouteSolution, solve_follower
from .instance import Instance, Trip


@dataclass(frozen=True)
class TripBounds:
    M_r: float          # d* with no legs open
    d_lower: float      # d* with every leg open
    ub_grow: float | None = None
    lb_shrink: float | None = None


@dataclass(frozen=True)
class LiftingSets:
    active_hubs: frozenset
    w_out: frozenset
    w_in: frozenset
    route_arcs: frozenset
    closest_active: bool  # route enters/leaves the bus network at the closest active hubs


def _endpoints(instance: Instance, trip: Trip) -> tuple[int, int]:
    net = instance.network
    return net.index(trip.origin), net.index(trip.destination)


def touches_hub(instance: Instance, trip: Trip) -> bool:
    hubs = set(instance.network.hubs)
    return trip.origin in hubs or trip.destination in hubs


def _hub_pair_extremes(instance: Instance, trip: Trip) -> tuple[float, float]:
    """min and max over hub pairs (h, l) of d[or, h] + d[l, de]."""
    o, t = _endpoints(instance, trip)
    hi = list(instance.network.hub_index)
    d = instance.network.dist
    to_hub = d[o, hi]
    from_hub = d[hi, t]
    return float(to_hub.min() + from_hub.min()), float(to_hub.max() + from_hub.max())


def _route_hubs(route: RouteSolution) -> tuple[int, int]:
    """Node indices of the first and last hub on a hub route."""
    return route.arcs[0][1], route.arcs[-1][0]


def _coef(instance: Instance) -> float | None:
    e = instance.econ
    if e.theta <= 0:
        return None
    return (1 - e.theta) / e.theta * e.shuttle_cost_per_mile


def ub_after_growth(instance: Instance, trip: Trip, route: RouteSolution) -> float | None:
    """Upper bound on the trip time under any design containing the current one."""
    c = _coef(instance)
    if c is None or touches_hub(instance, trip):
        return None
    o, t = _endpoints(instance, trip)
    d = instance.network.dist
    lo, _ = _hub_pair_extremes(instance, trip)
    t1 = route.f_value
    if route.is_direct:
        return max(t1, t1 + c * (d[o, t] - lo))
    m, n = _route_hubs(route)
    return t1 + c * (d[o, m] + d[n, t] - lo)


def lb_after_shrink(instance: Instance, trip: Trip, route: RouteSolution) -> float | None:
    """Lower bound on the trip time under any design contained in the current one."""
    c = _coef(instance)
    if c is None or touches_hub(instance, trip):
        return None
    if route.is_direct:
        return route.f_value
    o, t = _endpoints(instance, trip)
    d = instance.network.dist
    _, hi = _hub_pair_extremes(instance, trip)
    m, n = _route_hubs(route)
    return route.f_value + c * (d[o, m] + d[n, t] - max(hi, d[o, t]))


def is_provably_direct(instance: Instance, trip: Trip) -> bool:
    o, t = _endpoints(instance, trip)
    lo, _ = _hub_pair_extremes(instance, trip)
    return lo >= instance.network.dist[o, t]


def detect_direct_trips(instance: Instance) -> set:
    """Ids of trips served by a single shuttle ride under every design."""
    return {tr.id for tr in instance.trips if is_provably_direct(instance, tr)}


def compute_big_m(instance: Instance, trip: Trip) -> TripBounds:
    n = len(instance.network.hubs)
    top = solve_follower(instance, trip, Design.empty(n)).d_value
    bottom = solve_follower(instance, trip, Design.full(n)).d_value
    return TripBounds(M_r=top, d_lower=min(bottom, top))


def with_route_bounds(instance: Instance, trip: Trip, base: TripBounds, route: RouteSolution) -> TripBounds:
    return TripBounds(base.M_r, base.d_lower,
                      ub_after_growth(instance, trip, route),
                      lb_after_shrink(instance, trip, route))


def lifting_sets(instance: Instance, trip: Trip, design: Design, route: RouteSolution) -> LiftingSets:
    o, t = _endpoints(instance, trip)
    hi = instance.network.hub_index
    d = instance.network.dist
    active = design.active_hubs
    inactive = [h for h in range(len(hi)) if h not in active]
    near_out = min((d[o, hi[h]] for h in active), default=float("inf"))
    near_in = min((d[hi[h], t] for h in active), default=float("inf"))
    w_out = frozenset(h for h in inactive if d[o, hi[h]] < near_out)
    w_in = frozenset(h for h in inactive if d[hi[h], t] < near_in)
    closest = False
    if route.used_bus and not touches_hub(instance, trip):
        m, n = _route_hubs(route)
        closest = bool(d[o, m] == near_out and d[n, t] == near_in)
    return LiftingSets(frozenset(active), w_out, w_in, route.used_bus, closest)
