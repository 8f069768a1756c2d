"""Cut families for the relaxed master problem.

Every cut is a linear row

    sum_leg z_coeffs[leg] * z[leg] + delta_coeff * delta[trip] + d_coeff * d[trip] >= rhs

over the master variables of one trip.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .bounds import LiftingSets, TripBounds
from .follower import ChoiceOutcome, Design, DualSolution, trip_arcs
from .instance import Instance, Trip, derived_weights

log = logging.getLogger(__name__)


class CutKind(str, Enum):
    BENDERS = "benders"
    NOGOOD_FORCE_ZERO = "nogood_force_zero"
    NOGOOD_FORCE_ONE = "nogood_force_one"
    STRENGTHENED_ADOPT = "strengthened_adopt"
    STRENGTHENED_REJECT = "strengthened_reject"
    LIFTED_ADOPT = "lifted_adopt"
    LIFTED_ROUTE = "lifted_route"
    PARETO_BENDERS = "pareto_benders"


class Consistency(str, Enum):
    CONSISTENT = "consistent"
    ADOPT_MISMATCH_1A = "adopt_mismatch_1a"  # master adopts, follower does not
    ADOPT_MISMATCH_1B = "adopt_mismatch_1b"  # master rejects, follower adopts


@dataclass(frozen=True)
class Cut:
    kind: CutKind
    trip: object
    z_coeffs: dict = field(default_factory=dict)
    delta_coeff: float = 0.0
    d_coeff: float = 0.0
    rhs: float = 0.0

    def lhs(self, design: Design, delta: float = 0.0, d: float = 0.0) -> float:
        return (sum(c for leg, c in self.z_coeffs.items() if leg in design.open)
                + self.delta_coeff * delta + self.d_coeff * d)

    def satisfied(self, design: Design, delta: float = 0.0, d: float = 0.0, tol: float = 1e-6) -> bool:
        return self.lhs(design, delta, d) >= self.rhs - tol

    def signature(self) -> tuple:
        z = tuple(sorted((leg, round(c, 9)) for leg, c in self.z_coeffs.items() if c != 0))
        return (self.kind.value, self.trip, z, round(self.delta_coeff, 9),
                round(self.d_coeff, 9), round(self.rhs, 9))

    @property
    def is_benders(self) -> bool:
        return self.kind in (CutKind.BENDERS, CutKind.PARETO_BENDERS)

    def benders_rhs(self, design: Design) -> float:
        """Lower bound the cut places on ``d`` at ``design``."""
        return self.rhs - sum(c for leg, c in self.z_coeffs.items() if leg in design.open)


def benders_cut(trip: Trip, design: Design, dual: DualSolution,
                kind: CutKind = CutKind.BENDERS) -> Cut:
    """d >= (u_or - u_de) - sum_leg z_leg * v_leg."""
    coeffs = {leg: float(v) for leg, v in dual.v.items() if v > 0}
    return Cut(kind, trip.id, coeffs, 0.0, 1.0, float(dual.constant))


def consistency_status(master_adopts: bool, choice: ChoiceOutcome) -> Consistency:
    if master_adopts and not choice.adopts:
        return Consistency.ADOPT_MISMATCH_1A
    if not master_adopts and choice.adopts:
        return Consistency.ADOPT_MISMATCH_1B
    return Consistency.CONSISTENT


def _nogood_terms(design: Design, legs) -> tuple[dict, int]:
    """Coefficients of sum_{closed} z + sum_{open} (1 - z), minus its constant."""
    coeffs = {leg: (-1.0 if leg in design.open else 1.0) for leg in legs}
    return coeffs, len(design.open)


def nogood_force_zero(trip: Trip, design: Design, legs) -> Cut:
    # sum_{closed} z + sum_{open} (1 - z) >= delta
    coeffs, n_open = _nogood_terms(design, legs)
    return Cut(CutKind.NOGOOD_FORCE_ZERO, trip.id, coeffs, -1.0, 0.0, -float(n_open))


def nogood_force_one(trip: Trip, design: Design, legs) -> Cut:
    # sum_{closed} z + sum_{open} (1 - z) + delta >= 1
    coeffs, n_open = _nogood_terms(design, legs)
    return Cut(CutKind.NOGOOD_FORCE_ONE, trip.id, coeffs, 1.0, 0.0, 1.0 - n_open)


def strengthened_adopt(trip: Trip, design: Design) -> Cut:
    # sum_{open} (1 - z) + delta >= 1: adoption on every superset design
    coeffs = {leg: -1.0 for leg in design.open}
    return Cut(CutKind.STRENGTHENED_ADOPT, trip.id, coeffs, 1.0, 0.0, 1.0 - len(design.open))


def strengthened_reject(trip: Trip, design: Design, legs) -> Cut:
    # sum_{closed} z >= delta: rejection on every subset design
    coeffs = {leg: 1.0 for leg in legs if leg not in design.open}
    return Cut(CutKind.STRENGTHENED_REJECT, trip.id, coeffs, -1.0, 0.0, 0.0)


def lifted_adopt(trip: Trip, design: Design, lifting: LiftingSets, legs) -> Cut:
    """Adoption on supersets of ``design`` that keep the closer inactive hubs idle."""
    coeffs = {leg: -1.0 for leg in design.open}
    w = lifting.w_out | lifting.w_in
    for leg in legs:
        if leg[0] in w:
            coeffs[leg] = coeffs.get(leg, 0.0) + 1.0
    return Cut(CutKind.LIFTED_ADOPT, trip.id, coeffs, 1.0, 0.0, 1.0 - len(design.open))


def lifted_route(trip: Trip, design: Design, lifting: LiftingSets, legs, adopts: bool) -> Cut:
    """Choice is unchanged on subsets of ``design`` that keep the route's legs.

    Adopting:     sum_{route} (1 - z) + sum_{closed} z + delta >= 1
    Not adopting: sum_{route} (1 - z) + sum_{closed} z >= delta
    """
    route = lifting.route_arcs
    coeffs = {leg: -1.0 for leg in route}
    for leg in legs:
        if leg not in design.open:
            coeffs[leg] = 1.0
    if adopts:
        return Cut(CutKind.LIFTED_ROUTE, trip.id, coeffs, 1.0, 0.0, 1.0 - len(route))
    return Cut(CutKind.LIFTED_ROUTE, trip.id, coeffs, -1.0, 0.0, -float(len(route)))


@dataclass
class CutOptions:
    strengthen: bool = True
    lifting: bool = True


def consistency_cuts(instance: Instance, trip: Trip, design: Design, master_adopts: bool,
                     choice: ChoiceOutcome, bounds: TripBounds | None,
                     lifting: LiftingSets | None, options: CutOptions | None = None) -> list:
    """Cuts restoring choice consistency of ``trip`` at ``design``.

    Nothing is emitted for a consistent trip. The lifted cuts ride along with
    the nogood they extend.
    """
    options = options or CutOptions()
    status = consistency_status(master_adopts, choice)
    if status is Consistency.CONSISTENT:
        return []
    legs = instance.legs
    threshold = trip.alpha * trip.t_cur
    cuts = []
    if status is Consistency.ADOPT_MISMATCH_1A:
        lb = bounds.lb_shrink if bounds else None
        # strict: a time equal to the threshold would still adopt
        if options.strengthen and lb is not None and lb > threshold:
            cuts.append(strengthened_reject(trip, design, legs))
        else:
            cuts.append(nogood_force_zero(trip, design, legs))
        if options.lifting and lifting is not None:
            cuts.append(lifted_route(trip, design, lifting, legs, adopts=False))
    else:
        ub = bounds.ub_grow if bounds else None
        strong = options.strengthen and ub is not None and ub <= threshold
        cuts.append(strengthened_adopt(trip, design) if strong else nogood_force_one(trip, design, legs))
        if options.lifting and lifting is not None:
            if lifting.closest_active and instance.econ.theta > 0 and (lifting.w_out or lifting.w_in or not strong):
                cuts.append(lifted_adopt(trip, design, lifting, legs))
            cuts.append(lifted_route(trip, design, lifting, legs, adopts=True))
    return cuts


def pareto_refine(instance: Instance, trip: Trip, design: Design, base_dual: DualSolution,
                  core_eta: float = 0.5, backend: str = "highs") -> DualSolution:
    """Among optimal duals at ``design``, one maximizing the cut at the core point z = eta.

    Solved as a linear program with scipy's HiGHS. Falls back to
    ``base_dual`` when no LP backend is available or the solve fails.
    """
    if not 0.0 < core_eta < 1.0:
        raise ValueError("core_eta must lie in (0, 1)")
    if backend in (None, "none"):
        return base_dual
    try:
        from scipy.optimize import linprog
    except ImportError:  # pragma: no cover
        log.warning("no LP backend available; keeping the base dual")
        return base_dual

    w = derived_weights(instance, trip)
    arcset = trip_arcs(instance, trip)
    hub_idx = instance.network.hub_index
    verts = sorted({arcset.origin, arcset.destination, *hub_idx})
    pos = {n: k for k, n in enumerate(verts)}
    legs = list(instance.legs)
    nu, nv = len(verts), len(legs)
    o, t = pos[arcset.origin], pos[arcset.destination]

    # maximize (u_o - u_t) - eta * sum v  ->  minimize the negation
    c = np.zeros(nu + nv)
    c[o] -= 1.0
    c[t] += 1.0
    c[nu:] = core_eta

    rows, rhs = [], []
    for k, leg in enumerate(legs):
        i, j = hub_idx[leg[0]], hub_idx[leg[1]]
        r = np.zeros(nu + nv)
        r[pos[i]] += 1.0
        r[pos[j]] -= 1.0
        r[nu + k] = -1.0
        rows.append(r)
        rhs.append(w.bus(i, j))
    for i, j in arcset.shuttle_arcs:
        r = np.zeros(nu + nv)
        r[pos[i]] += 1.0
        r[pos[j]] -= 1.0
        rows.append(r)
        rhs.append(w.shuttle(i, j))
    eq = np.zeros(nu + nv)
    eq[o] += 1.0
    eq[t] -= 1.0
    for k, leg in enumerate(legs):
        if leg in design.open:
            eq[nu + k] = -1.0
    target = base_dual.cut_value(design)
    # potentials are shift invariant: solve them free with the destination
    # pinned, then shift back to a nonnegative representative
    bounds = [(None, None)] * nu + [(0, None)] * nv
    bounds[t] = (0, 0)

    res = linprog(c, A_ub=np.array(rows), b_ub=np.array(rhs), A_eq=eq[None, :], b_eq=[target],
                  bounds=bounds, method="highs")
    if res.status != 0:
        log.warning("Pareto LP failed for trip %r (%s); keeping the base dual", trip.id, res.message)
        return base_dual
    x = res.x
    u_raw = {n: float(x[pos[n]]) for n in verts}
    shift = min(u_raw.values())
    u = {n: val - shift for n, val in u_raw.items()}
    v = {leg: max(0.0, float(x[nu + k])) for k, leg in enumerate(legs)}
    for leg in design.open:
        v[leg] = 0.0 if v[leg] < 1e-12 else v[leg]
    refined = DualSolution(trip.id, arcset.origin, arcset.destination, u, v)
    # guard against LP round-off: never return something weaker at the core point
    base_core = base_dual.constant - core_eta * sum(base_dual.v.values())
    new_core = refined.constant - core_eta * sum(refined.v.values())
    if new_core < base_core - 1e-9 or abs(refined.cut_value(design) - target) > 1e-7:
        return base_dual
    return refined
