"""Brute-force bilevel solver used as ground truth on tiny instances.

Deliberately shares no solving code with the decomposition: designs are all
leg subsets filtered by degree balance, follower routes come from explicit
enumeration of simple paths, and the objective is recomputed from the raw
parameters.
"""
from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field

from .instance import Instance

TOL = 1e-9


class OracleLimitError(ValueError):
    pass


@dataclass
class DesignRecord:
    objective: float
    adoption: dict        # choice trip id -> bool
    d: dict               # trip id -> d*
    f: dict               # trip id -> f*


@dataclass
class OracleResult:
    best_design: frozenset
    best_objective: float
    per_design_table: dict = field(default_factory=dict)   # frozenset of legs -> DesignRecord


def all_leg_subsets(n_hubs: int):
    legs = [(a, b) for a in range(n_hubs) for b in range(n_hubs) if a != b]
    for bits in itertools.product((0, 1), repeat=len(legs)):
        yield frozenset(leg for leg, b in zip(legs, bits) if b)


def is_degree_balanced(open_legs: frozenset, n_hubs: int) -> bool:
    out_deg = [0] * n_hubs
    in_deg = [0] * n_hubs
    for a, b in open_legs:
        out_deg[a] += 1
        in_deg[b] += 1
    return out_deg == in_deg


def _paths(instance: Instance, trip, open_legs: frozenset):
    """Every simple origin->destination path as (d, f, arcs)."""
    net = instance.network
    e = instance.econ
    T, D = net.time, net.dist
    o, t = net.index(trip.origin), net.index(trip.destination)
    hubs = [net.index(h) for h in net.hubs]
    out = {}
    shuttle = set((o, h) for h in hubs if h != o) | set((h, t) for h in hubs if h != t) | {(o, t)}
    for i, j in shuttle:
        w = (1 - e.theta) * e.shuttle_cost_per_mile * D[i, j] + e.theta * T[i, j]
        out.setdefault(i, []).append((j, "shuttle", w, T[i, j]))
    for a, b in open_legs:
        i, j = hubs[a], hubs[b]
        out.setdefault(i, []).append((j, "bus", e.theta * (T[i, j] + e.bus_wait), T[i, j] + e.bus_wait))

    found = []

    def walk(node, seen, d, f, arcs):
        if node == t:
            found.append((d, f, arcs))
            return
        for j, mode, w, tt in out.get(node, ()):
            if j not in seen:
                walk(j, seen | {j}, d + w, f + tt, arcs + ((node, j, mode),))

    walk(o, {o}, 0.0, 0.0, ())
    return found


def lexmin_route(instance: Instance, trip, open_legs: frozenset) -> tuple[float, float, tuple]:
    best = None
    for cand in _paths(instance, trip, open_legs):
        if best is None:
            best = cand
            continue
        d, f, arcs = cand
        if d < best[0] - TOL or (abs(d - best[0]) <= TOL and
                                 (f < best[1] - TOL or (abs(f - best[1]) <= TOL and
                                                        (len(arcs), arcs) < (len(best[2]), best[2])))):
            best = cand
    return best


def design_objective(instance: Instance, open_legs: frozenset) -> DesignRecord:
    net, e = instance.network, instance.econ
    hubs = [net.index(h) for h in net.hubs]
    total = sum((1 - e.theta) * e.bus_cost_per_mile * e.buses_per_leg * net.dist[hubs[a], hubs[b]]
                for a, b in open_legs)
    revenue = (1 - e.theta) * e.fare
    adoption, ds, fs = {}, {}, {}
    for trip in instance.trips:
        d, f, _ = lexmin_route(instance, trip, open_legs)
        ds[trip.id], fs[trip.id] = d, f
        if trip.has_choice:
            adopts = f <= trip.alpha * trip.t_cur
            adoption[trip.id] = adopts
            if adopts:
                total += trip.riders * (d - revenue)
        else:
            total += trip.riders * d
    return DesignRecord(float(total), adoption, ds, fs)


def enumerate_bilevel(instance: Instance, max_hubs: int = 4) -> OracleResult:
    """Exact optimum over every degree-balanced design (first minimum kept)."""
    n = len(instance.network.hubs)
    if n > max_hubs:
        raise OracleLimitError(f"{n} hubs exceed the oracle limit of {max_hubs}")
    table = {}
    best, best_obj = None, float("inf")
    for legs in all_leg_subsets(n):
        if not is_degree_balanced(legs, n):
            continue
        rec = design_objective(instance, legs)
        table[legs] = rec
        if rec.objective < best_obj:
            best, best_obj = legs, rec.objective
    return OracleResult(best, best_obj, table)


def leg_label(instance: Instance, leg) -> str:
    h = instance.network.hubs
    return f"{h[leg[0]]}>{h[leg[1]]}"


def table_csv(instance: Instance, result: OracleResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    trips = [t.id for t in instance.trips]
    w.writerow(["design", "open_legs", "objective", "is_best", "adopters"]
               + [f"d[{t}]" for t in trips] + [f"f[{t}]" for t in trips])
    for k, (legs, rec) in enumerate(result.per_design_table.items()):
        w.writerow([k, ";".join(leg_label(instance, leg) for leg in sorted(legs)),
                    f"{rec.objective:.9f}", int(legs == result.best_design),
                    ";".join(str(t) for t, a in rec.adoption.items() if a)]
                   + [f"{rec.d[t]:.9f}" for t in trips] + [f"{rec.f[t]:.9f}" for t in trips])
    return buf.getvalue()
