"""Relaxed master problem: leg design, adoption, trip cost and the
linearized adoption-cost product, plus the accumulated cut pool.

Two solvers are provided. ``builtin`` enumerates every degree-balanced design
and solves the rest of the model in closed form; it needs nothing beyond
numpy and is exact up to the configured hub limit. ``external:highs`` hands
the explicit MILP rows to scipy's HiGHS interface.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .bounds import TripBounds
from .cuts import Cut
from .follower import Design, evaluate_choice, solve_follower
from .instance import Instance

log = logging.getLogger(__name__)

FEAS_TOL = 1e-6
DEFAULT_EXHAUSTIVE_LIMIT = 5


class MasterError(RuntimeError):
    """The master problem could not be solved."""


@dataclass
class Row:
    coeffs: dict           # variable key -> coefficient
    sense: str             # ">=", "<=", "=="
    rhs: float
    tag: str = ""


@dataclass
class MasterModel:
    instance: Instance
    trips: list                     # trips with master variables
    bounds: dict                    # trip id -> TripBounds
    fixed: dict = field(default_factory=dict)   # trip id -> (d, adopts or None)
    cuts: list = field(default_factory=list)
    beta: np.ndarray = None
    constant: float = 0.0
    _signatures: set = field(default_factory=set, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def legs(self):
        return self.instance.legs

    @property
    def n_hubs(self) -> int:
        return len(self.instance.network.hubs)

    @property
    def choice_trips(self) -> list:
        return [t for t in self.trips if t.has_choice]

    def add_cut(self, cut: Cut) -> bool:
        """Add ``cut`` unless an identical one is already pooled."""
        sig = cut.signature()
        if sig in self._signatures:
            return False
        self._signatures.add(sig)
        self.cuts.append(cut)
        return True

    # explicit form -------------------------------------------------------

    def variables(self) -> list:
        """(key, lower, upper, integer) for every master variable."""
        out = [(("z", leg), 0.0, 1.0, True) for leg in self.legs]
        out += [(("delta", t.id), 0.0, 1.0, True) for t in self.choice_trips]
        for t in self.trips:
            b = self.bounds[t.id]
            out.append((("d", t.id), b.d_lower, b.M_r, False))
        out += [(("nu", t.id), 0.0, self.bounds[t.id].M_r, False) for t in self.choice_trips]
        return out

    def objective(self) -> dict:
        rev = self.instance.econ.fare_revenue
        obj = {("z", leg): float(b) for leg, b in zip(self.legs, self.beta)}
        for t in self.trips:
            if t.has_choice:
                obj[("nu", t.id)] = float(t.riders)
                obj[("delta", t.id)] = -float(t.riders) * rev
            else:
                obj[("d", t.id)] = float(t.riders)
        return obj

    def balance_rows(self) -> list:
        rows = []
        for h in range(self.n_hubs):
            coeffs = {}
            for leg in self.legs:
                if leg[0] == h:
                    coeffs[("z", leg)] = coeffs.get(("z", leg), 0.0) + 1.0
                if leg[1] == h:
                    coeffs[("z", leg)] = coeffs.get(("z", leg), 0.0) - 1.0
            rows.append(Row(coeffs, "==", 0.0, f"balance[{h}]"))
        return rows

    def mccormick_rows(self) -> list:
        rows = []
        for t in self.choice_trips:
            m = self.bounds[t.id].M_r
            nu, dl, d = ("nu", t.id), ("delta", t.id), ("d", t.id)
            rows += [
                Row({nu: 1.0, dl: -m}, "<=", 0.0, f"mc_upper_delta[{t.id}]"),
                Row({nu: 1.0, d: -1.0}, "<=", 0.0, f"mc_upper_d[{t.id}]"),
                Row({nu: 1.0, d: -1.0, dl: -m}, ">=", -m, f"mc_lower[{t.id}]"),
                Row({nu: 1.0}, ">=", 0.0, f"mc_nonneg[{t.id}]"),
            ]
        return rows

    def cut_rows(self) -> list:
        rows = []
        for c in self.cuts:
            coeffs = {("z", leg): v for leg, v in c.z_coeffs.items() if v != 0}
            if c.delta_coeff:
                coeffs[("delta", c.trip)] = c.delta_coeff
            if c.d_coeff:
                coeffs[("d", c.trip)] = c.d_coeff
            rows.append(Row(coeffs, ">=", c.rhs, c.kind.value))
        return rows

    def rows(self) -> list:
        return self.balance_rows() + self.mccormick_rows() + self.cut_rows()


@dataclass
class MasterSolution:
    design: Design
    adopt: dict        # choice trip id -> bool
    d_bar: dict        # trip id -> float
    nu: dict           # choice trip id -> float
    objective_value: float


def build_master(instance: Instance, bounds: dict, fixed_direct: set = frozenset()) -> MasterModel:
    """Initial relaxed master.

    Trips in ``fixed_direct`` are taken out of the model; they contribute the
    cost of their direct ride (and, for choice trips, the fare if that ride is
    acceptable) as a constant.
    """
    rev = instance.econ.fare_revenue
    empty = Design.empty(len(instance.network.hubs))
    trips, fixed, constant = [], {}, 0.0
    for t in instance.trips:
        if t.id in fixed_direct:
            route = solve_follower(instance, t, empty)
            if t.has_choice:
                adopts = evaluate_choice(t, route).adopts
                fixed[t.id] = (route.d_value, adopts)
                if adopts:
                    constant += t.riders * (route.d_value - rev)
            else:
                fixed[t.id] = (route.d_value, None)
                constant += t.riders * route.d_value
        else:
            trips.append(t)
    return MasterModel(instance, trips, dict(bounds), fixed, [], instance.leg_investment(), constant)


# ---------------------------------------------------------------------------
# built-in exhaustive solver
# ---------------------------------------------------------------------------

@lru_cache(maxsize=8)
def balanced_designs(n_hubs: int) -> np.ndarray:
    """0/1 matrix whose rows are all degree-balanced designs, in binary counting order."""
    legs = [(a, b) for a in range(n_hubs) for b in range(n_hubs) if a != b]
    n = len(legs)
    codes = np.arange(2 ** n, dtype=np.int64)
    z = ((codes[:, None] >> np.arange(n)) & 1).astype(np.int8)
    inc = np.zeros((n, n_hubs), dtype=np.int8)
    for k, (a, b) in enumerate(legs):
        inc[k, a] += 1
        inc[k, b] -= 1
    keep = ~np.any(z @ inc, axis=1)
    out = z[keep]
    out.flags.writeable = False
    return out


class _TripState:
    """Per-trip evaluation of the cut pool over every enumerated design."""

    def __init__(self, n_designs: int, bound: TripBounds):
        self.d = np.full(n_designs, bound.d_lower)
        self.ok0 = np.ones(n_designs, dtype=bool)
        self.ok1 = np.ones(n_designs, dtype=bool)


def builtin_exact_solve(model: MasterModel, limit: int = DEFAULT_EXHAUSTIVE_LIMIT) -> MasterSolution:
    """Globally optimal master solution by enumerating degree-balanced designs.

    For a fixed design, each trip's cost is the largest Benders bound (or its
    static lower bound), and each adoption variable takes the cheaper value
    allowed by the consistency cuts evaluated at that design.
    """
    if model.n_hubs > limit:
        raise MasterError(f"{model.n_hubs} hubs exceed the exhaustive limit of {limit}")
    Z = balanced_designs(model.n_hubs).astype(float)
    n_designs = len(Z)
    cache = model._cache
    if cache.get("n") != n_designs:
        cache.clear()
        cache.update(n=n_designs, seen=0, state={})
    states = cache["state"]
    for t in model.trips:
        if t.id not in states:
            states[t.id] = _TripState(n_designs, model.bounds[t.id])
    leg_pos = {leg: k for k, leg in enumerate(model.legs)}

    for cut in model.cuts[cache["seen"]:]:
        st = states.get(cut.trip)
        if st is None:
            continue
        a = np.zeros(len(leg_pos))
        for leg, c in cut.z_coeffs.items():
            a[leg_pos[leg]] = c
        s = Z @ a
        if cut.d_coeff:
            # d_coeff * d >= rhs - s - delta_coeff*delta; Benders cuts have delta_coeff 0
            np.maximum(st.d, (cut.rhs - s) / cut.d_coeff, out=st.d)
        else:
            st.ok0 &= s >= cut.rhs - FEAS_TOL
            st.ok1 &= s + cut.delta_coeff >= cut.rhs - FEAS_TOL
    cache["seen"] = len(model.cuts)

    rev = model.instance.econ.fare_revenue
    total = Z @ model.beta + model.constant
    choose = {}
    for t in model.trips:
        st = states[t.id]
        if not t.has_choice:
            total += t.riders * st.d
            continue
        gain = t.riders * (st.d - rev)
        adopt = np.where(st.ok0 & st.ok1, gain < 0, st.ok1)
        total += np.where(adopt, gain, 0.0)
        total[~(st.ok0 | st.ok1)] = np.inf
        choose[t.id] = adopt
    k = int(np.argmin(total))
    if not np.isfinite(total[k]):
        raise MasterError("every design is infeasible for the current cut pool")
    design = Design.from_vector(model.n_hubs, model.legs, Z[k])
    d_bar = {t.id: float(states[t.id].d[k]) for t in model.trips}
    adopt = {tid: bool(a[k]) for tid, a in choose.items()}
    nu = {tid: (d_bar[tid] if adopt[tid] else 0.0) for tid in adopt}
    return MasterSolution(design, adopt, d_bar, nu, float(total[k]))


# ---------------------------------------------------------------------------
# external MILP backend
# ---------------------------------------------------------------------------

class LinearBackend:
    """Minimal MILP builder interface: variables, rows, objective, solve, values."""

    def add_var(self, key, lb: float, ub: float, integer: bool = False) -> None:
        raise NotImplementedError

    def add_row(self, coeffs: dict, sense: str, rhs: float) -> None:
        raise NotImplementedError

    def set_objective(self, coeffs: dict, constant: float = 0.0) -> None:
        raise NotImplementedError

    def solve(self, time_limit: float | None = None) -> float:
        raise NotImplementedError

    def value(self, key) -> float:
        raise NotImplementedError


class ScipyMilpBackend(LinearBackend):
    """HiGHS through ``scipy.optimize.milp``."""

    def __init__(self, mip_rel_gap: float = 1e-10):
        self.keys, self.lb, self.ub, self.integer = [], [], [], []
        self.pos = {}
        self.rows = []
        self.c, self.c0 = {}, 0.0
        self.mip_rel_gap = mip_rel_gap
        self.x = None

    def add_var(self, key, lb, ub, integer=False):
        self.pos[key] = len(self.keys)
        self.keys.append(key)
        self.lb.append(lb)
        self.ub.append(ub)
        self.integer.append(1 if integer else 0)

    def add_row(self, coeffs, sense, rhs):
        self.rows.append((coeffs, sense, rhs))

    def set_objective(self, coeffs, constant=0.0):
        self.c, self.c0 = dict(coeffs), constant

    def solve(self, time_limit=None):
        from scipy.optimize import Bounds, LinearConstraint, milp

        n = len(self.keys)
        c = np.zeros(n)
        for key, v in self.c.items():
            c[self.pos[key]] = v
        constraints = []
        if self.rows:
            A = np.zeros((len(self.rows), n))
            lo = np.full(len(self.rows), -np.inf)
            hi = np.full(len(self.rows), np.inf)
            for r, (coeffs, sense, rhs) in enumerate(self.rows):
                for key, v in coeffs.items():
                    A[r, self.pos[key]] += v
                if sense in (">=", "=="):
                    lo[r] = rhs
                if sense in ("<=", "=="):
                    hi[r] = rhs
            constraints.append(LinearConstraint(A, lo, hi))
        options = {"mip_rel_gap": self.mip_rel_gap}
        if time_limit is not None:
            options["time_limit"] = time_limit
        res = milp(c, constraints=constraints, integrality=np.array(self.integer),
                   bounds=Bounds(np.array(self.lb), np.array(self.ub)), options=options)
        if res.x is None or res.status not in (0,):
            raise MasterError(f"HiGHS failed: {res.message}")
        self.x = res.x
        fun = float(res.fun)
        if constraints:
            polished = self._polish(c, A, lo, hi, res.x)
            if polished is not None:
                self.x, fun = polished
        return fun + self.c0

    def _polish(self, c, A, lo, hi, x):
        """Fix the integers at their rounded values and re-solve the continuous
        part at tight tolerances. MIP feasibility tolerances otherwise leave
        products like nu = delta * d off by up to about 1e-6."""
        from scipy.optimize import linprog

        integer = np.array(self.integer, dtype=bool)
        lb, ub = np.array(self.lb, dtype=float), np.array(self.ub, dtype=float)
        lb[integer] = ub[integer] = np.round(x[integer])
        eq = lo == hi
        upper = ~eq & np.isfinite(hi)
        lower = ~eq & np.isfinite(lo)
        A_ub = np.vstack([A[upper], -A[lower]])
        b_ub = np.concatenate([hi[upper], -lo[lower]])
        res = linprog(c, A_ub=A_ub if len(b_ub) else None, b_ub=b_ub if len(b_ub) else None,
                      A_eq=A[eq] if eq.any() else None, b_eq=hi[eq] if eq.any() else None,
                      bounds=list(zip(lb, ub)), method="highs",
                      options={"primal_feasibility_tolerance": 1e-10,
                               "dual_feasibility_tolerance": 1e-10})
        if res.status != 0:
            return None
        return res.x, float(res.fun)

    def value(self, key):
        return float(self.x[self.pos[key]])


def _solve_with_backend(model: MasterModel, backend: LinearBackend,
                        time_limit: float | None = None) -> MasterSolution:
    for key, lb, ub, integer in model.variables():
        backend.add_var(key, lb, ub, integer)
    for row in model.rows():
        backend.add_row(row.coeffs, row.sense, row.rhs)
    backend.set_objective(model.objective(), model.constant)
    obj = backend.solve(time_limit)
    z = [round(backend.value(("z", leg))) for leg in model.legs]
    design = Design.from_vector(model.n_hubs, model.legs, z)
    adopt = {t.id: backend.value(("delta", t.id)) > 0.5 for t in model.choice_trips}
    d_bar = {t.id: backend.value(("d", t.id)) for t in model.trips}
    nu = {t.id: backend.value(("nu", t.id)) for t in model.choice_trips}
    return MasterSolution(design, adopt, d_bar, nu, obj)


def resolve_backend(name: str, n_hubs: int, limit: int = DEFAULT_EXHAUSTIVE_LIMIT) -> str:
    if name in (None, "", "auto"):
        return "builtin" if n_hubs <= limit else "external:highs"
    if name == "builtin" or name.startswith("external:"):
        return name
    raise ValueError(f"unknown solver backend {name!r}")


def solve_master(model: MasterModel, backend: str = "auto", limit: int = DEFAULT_EXHAUSTIVE_LIMIT,
                 time_limit: float | None = None) -> MasterSolution:
    name = resolve_backend(backend, model.n_hubs, limit)
    if name == "builtin":
        return builtin_exact_solve(model, limit)
    engine = name.split(":", 1)[1]
    if engine not in ("highs", "scipy"):
        raise MasterError(f"external backend {engine!r} is not available")
    return _solve_with_backend(model, ScipyMilpBackend(), time_limit)
