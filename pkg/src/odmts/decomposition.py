"""Benders + combinatorial-cut decomposition for the bilevel design problem.

Each iteration solves the relaxed master, evaluates every trip's follower at
the master design, adds one Benders cut per trip and consistency cuts for
choice trips whose master adoption disagrees with the follower, then updates
the bounds. The loop stops when ``UB <= LB + eps``.
"""
from __future__ import annotations

import json
import logging
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

from .bounds import (TripBounds, compute_big_m, detect_direct_trips, lifting_sets,
                     with_route_bounds)
from .cuts import CutKind, CutOptions, benders_cut, consistency_cuts, pareto_refine
from .follower import ChoiceOutcome, Design, evaluate_choice, extract_duals, solve_follower
from .instance import Instance, metricize_instance
from .master import DEFAULT_EXHAUSTIVE_LIMIT, build_master, solve_master

log = logging.getLogger(__name__)


@dataclass
class SolveConfig:
    eps: float = 1e-6
    time_limit: float = 7200.0
    max_iterations: int | None = None
    eta: float = 0.5
    strengthen: bool = True
    lifting: bool = True
    pareto: bool = True
    direct_preprocess: bool = True
    only_violated: bool = False
    backend: str = "auto"
    exhaustive_limit: int = DEFAULT_EXHAUSTIVE_LIMIT
    threads: int = 1
    seed: int = 0

    _KEYS = {
        "solver.backend": "backend",
        "cuts.pareto": "pareto",
        "cuts.strengthen": "strengthen",
        "cuts.lifting": "lifting",
        "cuts.eta": "eta",
        "cuts.only_violated": "only_violated",
    }

    @classmethod
    def from_mapping(cls, mapping: dict) -> "SolveConfig":
        """Build from plain or dotted keys (``cuts.pareto``, ``solver.backend``...)."""
        kwargs = {}
        names = set(cls.__dataclass_fields__)
        for key, value in mapping.items():
            name = cls._KEYS.get(key, key)
            if name not in names or name.startswith("_"):
                raise ValueError(f"unknown configuration key {key!r}")
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def base(cls, **kw) -> "SolveConfig":
        """Plain Benders + nogood configuration without any enhancement."""
        return cls(strengthen=False, lifting=False, pareto=False, direct_preprocess=False, **kw)


@dataclass
class IterationRecord:
    iter: int
    LB: float
    UB: float
    incumbent_flag: bool
    cuts_added: dict
    wall_time: float

    @property
    def gap(self) -> float:
        return relative_gap(self.LB, self.UB)


@dataclass
class SolveRun:
    iterations: list = field(default_factory=list)
    incumbent: Design | None = None
    incumbent_adoption: dict = field(default_factory=dict)
    incumbent_objective: float = math.inf
    status: str = "iteration_limit"
    direct_trips: frozenset = frozenset()
    master_checks: list = field(default_factory=list)  # max |nu - delta*d| per master solve

    @property
    def lower_bound(self) -> float:
        return self.iterations[-1].LB if self.iterations else -math.inf

    @property
    def upper_bound(self) -> float:
        return self.incumbent_objective

    def iterations_to_gap(self, gap: float) -> int | None:
        for rec in self.iterations:
            if rec.gap <= gap:
                return rec.iter
        return None

    def log_lines(self, timing: bool = False) -> list:
        """JSON lines, one per iteration. ``wall_time`` only when ``timing``."""
        out = []
        for rec in self.iterations:
            d = asdict(rec)
            if not timing:
                d.pop("wall_time")
            out.append(json.dumps(d, sort_keys=True))
        return out


def relative_gap(lb: float, ub: float) -> float:
    if not math.isfinite(ub) or not math.isfinite(lb):
        return math.inf
    return max(0.0, ub - lb) / max(abs(ub), 1e-9)


def upper_bound(instance: Instance, design: Design, routes: dict, choices: dict) -> float:
    """Bilevel objective of ``design`` given each trip's follower route.

    ``routes`` maps every trip id to its route; ``choices`` maps choice trip
    ids to the follower-induced adoption.
    """
    rev = instance.econ.fare_revenue
    total = sum(b for leg, b in zip(instance.legs, instance.leg_investment()) if leg in design.open)
    for t in instance.trips:
        d = routes[t.id].d_value
        if not t.has_choice:
            total += t.riders * d
        elif choices[t.id]:
            total += t.riders * (d - rev)
    return float(total)


def evaluate_design(instance: Instance, design: Design) -> tuple[float, dict, dict]:
    """Objective, routes and adoption of ``design`` evaluated from scratch."""
    routes = {t.id: solve_follower(instance, t, design) for t in instance.trips}
    choices = {t.id: evaluate_choice(t, routes[t.id]).adopts for t in instance.choice_trips}
    return upper_bound(instance, design, routes, choices), routes, choices


def _trip_work(instance, trip, design, base_bounds, config, master_adopts):
    """Follower solve and cut generation for one trip (pure, parallel-safe)."""
    route = solve_follower(instance, trip, design)
    dual = extract_duals(instance, trip, design, route)
    kind = CutKind.BENDERS
    if config.pareto:
        refined = pareto_refine(instance, trip, design, dual, config.eta)
        if refined is not dual:
            dual, kind = refined, CutKind.PARETO_BENDERS
    cuts = [benders_cut(trip, design, dual, kind)]
    choice = None
    if trip.has_choice:
        choice = evaluate_choice(trip, route).adopts
        if master_adopts is not None:
            bounds = with_route_bounds(instance, trip, base_bounds, route) if config.strengthen else None
            lifting = lifting_sets(instance, trip, design, route) if config.lifting else None
            cuts += consistency_cuts(instance, trip, design, master_adopts, ChoiceOutcome(choice),
                                     bounds, lifting, CutOptions(config.strengthen, config.lifting))
    return route, choice, cuts


def solve(instance: Instance, config: SolveConfig | None = None) -> SolveRun:
    config = config or SolveConfig()
    start = time.perf_counter()
    instance = metricize_instance(instance)

    direct = detect_direct_trips(instance) if config.direct_preprocess else set()
    bounds: dict[object, TripBounds] = {}
    for t in instance.trips:
        if t.id not in direct:
            bounds[t.id] = compute_big_m(instance, t)
    model = build_master(instance, bounds, direct)
    run = SolveRun(direct_trips=frozenset(direct))

    lb, ub = -math.inf, math.inf
    it = 0
    pool = ThreadPoolExecutor(config.threads) if config.threads > 1 else None
    try:
        while True:
            if config.max_iterations is not None and it >= config.max_iterations:
                run.status = "iteration_limit"
                break
            remaining = config.time_limit - (time.perf_counter() - start)
            if remaining <= 0:
                run.status = "time_limit"
                break
            it += 1
            sol = solve_master(model, config.backend, config.exhaustive_limit)
            lb = max(lb, sol.objective_value)
            run.master_checks.append(max(
                (abs(sol.nu[k] - (1.0 if sol.adopt[k] else 0.0) * sol.d_bar[k]) for k in sol.nu),
                default=0.0))
            design = sol.design

            def work(trip):
                return _trip_work(instance, trip, design, bounds.get(trip.id), config,
                                  sol.adopt.get(trip.id))
            results = list(pool.map(work, model.trips)) if pool else [work(t) for t in model.trips]

            added = Counter()
            routes, choices = {}, {}
            for trip, (route, choice, cuts) in zip(model.trips, results):
                routes[trip.id] = route
                if choice is not None:
                    choices[trip.id] = choice
                for cut in cuts:
                    if config.only_violated and cut.d_coeff and \
                            cut.benders_rhs(design) <= sol.d_bar[trip.id] + 1e-9:
                        continue
                    if model.add_cut(cut):
                        added[cut.kind.value] += 1
            for tid in direct:
                t = instance.trip(tid)
                routes[tid] = solve_follower(instance, t, design)
                if t.has_choice:
                    choices[tid] = evaluate_choice(t, routes[tid]).adopts

            ub_hat = upper_bound(instance, design, routes, choices)
            improved = ub_hat < ub
            if improved:
                ub = ub_hat
                run.incumbent = design
                run.incumbent_adoption = dict(sorted(choices.items(), key=lambda kv: str(kv[0])))
                run.incumbent_objective = ub
            run.iterations.append(IterationRecord(
                it, lb, ub, improved, dict(sorted(added.items())), time.perf_counter() - start))
            log.debug("iter %d LB %.6f UB %.6f cuts %s", it, lb, ub, dict(added))
            if ub <= lb + config.eps:
                run.status = "optimal"
                break
            if not added:
                # no new cut and no convergence would loop forever
                raise RuntimeError("decomposition stalled: master repeated a design without new cuts")
    finally:
        if pool:
            pool.shutdown()
    return run
