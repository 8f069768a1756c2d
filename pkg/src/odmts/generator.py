"""Seeded synthetic instances shaped like a mid-size city transit study.

Stops are uniform in a box, hubs are picked by farthest-point selection and
trips are stratified by income class. A stop's income class comes from a
zoning of the box and a trip's class is that of its destination.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .instance import EconomicParams, Instance, Network, Trip, metricize

CLASSES = ("low", "medium", "high")


@dataclass
class GenSpec:
    seed: int = 0
    n_stops: int = 40
    n_hubs: int = 5
    n_trips: int = 100
    income_mix: tuple = (0.4, 0.45, 0.15)
    # share of each class's trips that have a mode choice
    choice_fractions: tuple = (0.0, 0.25, 0.5)
    alphas: tuple = (4.0, 2.0, 1.5)
    box: tuple = (10.0, 10.0)        # miles
    speed: float = 2.0               # minutes per mile
    max_riders: int = 5
    asymmetric_detours: float = 0.0  # probability an arc gets a detour factor
    detour_max: float = 1.5
    lilt_min_time: float | None = None  # low-income trips at least this long get a choice
    lilt_alpha: float = 4.0
    econ: dict = field(default_factory=dict)

    def __post_init__(self):
        self.income_mix = tuple(float(x) for x in self.income_mix)
        self.choice_fractions = tuple(float(x) for x in self.choice_fractions)
        self.alphas = tuple(float(x) for x in self.alphas)
        self.box = tuple(float(x) for x in self.box)
        if len(self.income_mix) != 3 or abs(sum(self.income_mix) - 1.0) > 1e-9:
            raise ValueError("income_mix must be three fractions summing to 1")
        if any(x < 0 for x in self.income_mix):
            raise ValueError("income_mix fractions must be nonnegative")
        if not all(0.0 <= x <= 1.0 for x in self.choice_fractions):
            raise ValueError("choice_fractions must lie in [0, 1]")
        if not 1 <= self.n_hubs <= self.n_stops:
            raise ValueError("need 1 <= n_hubs <= n_stops")
        if self.n_stops < 2:
            raise ValueError("need at least two stops")

    @classmethod
    def from_json(cls, path: str | Path) -> "GenSpec":
        return cls(**json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)


def _class_counts(n: int, mix) -> list:
    """Largest-remainder split of n items, so each count is within one of n * share."""
    raw = [n * m for m in mix]
    counts = [int(np.floor(r)) for r in raw]
    order = sorted(range(len(mix)), key=lambda k: (-(raw[k] - counts[k]), k))
    for k in order[: n - sum(counts)]:
        counts[k] += 1
    return counts


def _farthest_points(xy: np.ndarray, k: int) -> list:
    centre = xy.mean(axis=0)
    chosen = [int(np.argmin(np.linalg.norm(xy - centre, axis=1)))]
    dmin = np.linalg.norm(xy - xy[chosen[0]], axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, np.linalg.norm(xy - xy[nxt], axis=1))
    return chosen


def _zone(xy: np.ndarray, box, mix) -> np.ndarray:
    """Income class per stop: bands by distance from the box centre,
    low-income inner band, high-income outer band."""
    centre = np.array(box) / 2
    r = np.linalg.norm(xy - centre, axis=1)
    order = np.argsort(r, kind="stable")
    counts = _class_counts(len(xy), mix)
    zone = np.empty(len(xy), dtype=int)
    start = 0
    for c, n in enumerate(counts):
        zone[order[start:start + n]] = c
        start += n
    return zone


def generate(spec: GenSpec) -> Instance:
    rng = np.random.default_rng(spec.seed)
    xy = rng.uniform((0.0, 0.0), spec.box, size=(spec.n_stops, 2))
    xy = np.round(xy, 4)
    dist = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=2)
    if spec.asymmetric_detours > 0:
        mask = rng.random(dist.shape) < spec.asymmetric_detours
        factor = rng.uniform(1.0, spec.detour_max, size=dist.shape)
        dist = np.where(mask, dist * factor, dist)
        np.fill_diagonal(dist, 0.0)
    time = spec.speed * dist
    nodes = [f"s{k}" for k in range(spec.n_stops)]
    hubs = [nodes[k] for k in sorted(_farthest_points(xy, spec.n_hubs))]
    network = metricize(Network(nodes, hubs, time, dist, xy))
    time, dist = network.time, network.dist

    zone = _zone(xy, spec.box, spec.income_mix)
    by_class = [np.flatnonzero(zone == c) for c in range(3)]
    counts = _class_counts(spec.n_trips, spec.income_mix)
    trips = []
    k = 0
    for c, n_c in enumerate(counts):
        n_choice = int(round(spec.choice_fractions[c] * n_c))
        dests = by_class[c] if len(by_class[c]) else np.arange(spec.n_stops)
        for j in range(n_c):
            de = int(rng.choice(dests))
            orig = int(rng.integers(spec.n_stops - 1))
            orig = orig + 1 if orig >= de else orig
            riders = int(rng.integers(1, spec.max_riders + 1))
            t_od = float(time[orig, de])
            has_choice = j < n_choice
            alpha = spec.alphas[c]
            if not has_choice and c == 0 and spec.lilt_min_time is not None and t_od >= spec.lilt_min_time:
                has_choice, alpha = True, spec.lilt_alpha
            trips.append(Trip(
                id=f"r{k}", origin=nodes[orig], destination=nodes[de], riders=riders,
                has_choice=has_choice,
                alpha=alpha if has_choice else None,
                t_cur=t_od if has_choice else None,
                income_class=CLASSES[c]))
            k += 1
    return Instance(network, tuple(trips), EconomicParams(**spec.econ))
