"""Result files, summary tables and GeoJSON export."""
from __future__ import annotations

import csv
import io
import json
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .bounds import detect_direct_trips
from .decomposition import SolveRun, evaluate_design
from .follower import Design
from .instance import INCOME_CLASSES, Instance, metricize_instance

GROUPS = ("adopting", "existing", "not_adopting")
WEEKS, DAYS, HOURS_PER_DAY = 52, 5, 12


@dataclass
class Report:
    duration_table: dict = field(default_factory=dict)  # (class, group) -> {odmts, direct, baseline}
    cost_table: dict = field(default_factory=dict)
    direct_table: dict = field(default_factory=dict)    # class -> {trips, direct, pct}


def _mean(values, weights):
    w = sum(weights)
    return None if w == 0 else sum(v * p for v, p in zip(values, weights)) / w


def _as_design(instance: Instance, source) -> Design:
    if isinstance(source, Design):
        return source
    if isinstance(source, SolveRun):
        return source.incumbent or Design.empty(len(instance.network.hubs))
    if isinstance(source, dict):
        return design_from_result(instance, source)
    raise TypeError(f"cannot take a design from {type(source).__name__}")


def build_report(instance: Instance, solve_run, baseline: Design | None = None) -> Report:
    """Tables for the incumbent of ``solve_run`` (a SolveRun, Design or result dict).

    Every number is recomputed from the instance and the design alone.
    """
    instance = metricize_instance(instance)
    design = _as_design(instance, solve_run)
    net = instance.network
    _, routes, choices = evaluate_design(instance, design)
    base_routes = evaluate_design(instance, baseline)[1] if baseline is not None else None

    rep = Report()
    for cls in INCOME_CLASSES:
        for group in GROUPS:
            members = []
            for t in instance.trips:
                if t.income_class != cls:
                    continue
                g = "existing" if not t.has_choice else ("adopting" if choices[t.id] else "not_adopting")
                if g == group:
                    members.append(t)
            p = [t.riders for t in members]
            row = {
                "odmts": _mean([routes[t.id].f_value for t in members], p),
                "direct": _mean([float(net.time[net.index(t.origin), net.index(t.destination)])
                                 for t in members], p),
            }
            if base_routes is not None:
                row["baseline"] = _mean([base_routes[t.id].f_value for t in members], p)
            rep.duration_table[(cls, group)] = row

    served = [t for t in instance.trips if not t.has_choice or choices[t.id]]
    riders = sum(t.riders for t in instance.trips)
    odmts_riders = sum(t.riders for t in served)
    revenue = instance.econ.fare_revenue * odmts_riders
    inv = float(sum(b for leg, b in zip(instance.legs, instance.leg_investment()) if leg in design.open))
    trv = float(sum(t.riders * routes[t.id].d_value for t in served))

    def share(cls):
        total = sum(t.riders for t in instance.trips if t.income_class == cls)
        used = sum(t.riders for t in served if t.income_class == cls)
        return None if total == 0 else 100.0 * used / total

    rep.cost_table = {
        "MI": share("medium"), "HI": share("high"),
        "riders": riders, "odmts_riders": odmts_riders,
        "revenue": revenue, "inv_cost": inv, "trv_cost": trv,
        "nc_per_rider": None if odmts_riders == 0 else (inv + trv - revenue) / odmts_riders,
    }

    direct = detect_direct_trips(instance)
    for cls in INCOME_CLASSES:
        ids = [t.id for t in instance.trips if t.income_class == cls]
        n_direct = sum(1 for i in ids if i in direct)
        rep.direct_table[cls] = {"trips": len(ids), "direct": n_direct,
                                 "pct": None if not ids else 100.0 * n_direct / len(ids)}
    ids = [t.id for t in instance.trips]
    rep.direct_table["total"] = {"trips": len(ids), "direct": len(direct),
                                 "pct": None if not ids else 100.0 * len(direct) / len(ids)}
    return rep


def _fmt(x) -> str:
    return "NA" if x is None else f"{x:.2f}"


def report_csv(rep: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["table", "row", "group", "column", "value"])
    for (cls, group), row in rep.duration_table.items():
        for col, v in row.items():
            w.writerow(["duration", cls, group, col, _fmt(v)])
    for col, v in rep.cost_table.items():
        w.writerow(["cost", "", "", col, v if isinstance(v, int) else _fmt(v)])
    for cls, row in rep.direct_table.items():
        for col, v in row.items():
            w.writerow(["direct", cls, "", col, v if isinstance(v, int) else _fmt(v)])
    return buf.getvalue()


def report_text(rep: Report) -> str:
    lines = ["Trip durations (minutes, rider-weighted)"]
    cols = sorted({c for row in rep.duration_table.values() for c in row},
                  key=["odmts", "direct", "baseline"].index)
    lines.append(f"{'income':>8} {'group':>13} " + " ".join(f"{c:>9}" for c in cols))
    for (cls, group), row in rep.duration_table.items():
        lines.append(f"{cls:>8} {group:>13} " + " ".join(f"{_fmt(row.get(c)):>9}" for c in cols))
    c = rep.cost_table
    lines.append("")
    lines.append("Adoption, revenue and costs")
    lines.append(f"MI {_fmt(c['MI'])}%  HI {_fmt(c['HI'])}%  riders {c['riders']} ({c['odmts_riders']})")
    lines.append(f"Revenue {_fmt(c['revenue'])}  Inv Cost {_fmt(c['inv_cost'])}  "
                 f"Trv Cost {_fmt(c['trv_cost'])}  NC/rider {_fmt(c['nc_per_rider'])}")
    lines.append("")
    lines.append("Direct trips")
    for cls, row in rep.direct_table.items():
        lines.append(f"{cls:>8} {row['trips']:>6} {row['direct']:>6} {_fmt(row['pct']):>7}")
    return "\n".join(lines) + "\n"


def annualized_savings(objective_a: float, objective_b: float, horizon_hours: float = 4.0) -> float:
    """Scale the per-horizon difference a - b to a year of weekday service."""
    return (objective_a - objective_b) * WEEKS * DAYS * (HOURS_PER_DAY / horizon_hours)


# ---------------------------------------------------------------------------
# result files
# ---------------------------------------------------------------------------

def result_dict(instance: Instance, run: SolveRun, instance_path: str | None = None,
                config: dict | None = None) -> dict:
    instance = metricize_instance(instance)
    net = instance.network
    design = run.incumbent or Design.empty(len(net.hubs))
    _, routes, choices = evaluate_design(instance, design)
    out = {
        "instance": instance_path,
        "status": run.status,
        "objective": run.incumbent_objective,
        "lower_bound": run.lower_bound,
        "upper_bound": run.upper_bound,
        "iterations": len(run.iterations),
        "design": {
            "hubs": list(net.hubs),
            "open_legs": [[net.hubs[a], net.hubs[b]] for a, b in design.sorted_legs()],
            "matrix": design.matrix().astype(int).tolist(),
        },
        "adoption": {str(k): v for k, v in choices.items()},
        "direct_trips": sorted(str(t) for t in run.direct_trips),
        "routes": {},
    }
    for t in instance.trips:
        r = routes[t.id]
        out["routes"][str(t.id)] = {
            "nodes": [net.nodes[i] for i in r.nodes],
            "modes": [a[2] for a in r.arcs],
            "d": r.d_value,
            "f": r.f_value,
        }
    if config is not None:
        out["config"] = config
    return out


def design_from_result(instance: Instance, result: dict) -> Design:
    hubs = list(instance.network.hubs)
    legs = [(hubs.index(a), hubs.index(b)) for a, b in result["design"]["open_legs"]]
    return Design(len(hubs), frozenset(legs))


def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# GeoJSON
# ---------------------------------------------------------------------------

def planar_coords(instance: Instance) -> np.ndarray:
    """Stored coordinates, or a classical-MDS embedding of the distance matrix."""
    net = instance.network
    if net.coords is not None:
        return np.asarray(net.coords)
    d = (net.dist + net.dist.T) / 2
    n = len(d)
    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * j @ (d ** 2) @ j
    vals, vecs = np.linalg.eigh(b)
    order = np.argsort(vals)[::-1][:2]
    xy = vecs[:, order] * np.sqrt(np.clip(vals[order], 0, None))
    if xy.shape[1] < 2:
        xy = np.hstack([xy, np.zeros((n, 2 - xy.shape[1]))])
    return xy


def to_geojson(instance: Instance, design: Design) -> dict:
    net = instance.network
    xy = planar_coords(instance)
    stop_class = {}
    votes: dict = {}
    for t in instance.trips:
        votes.setdefault(t.destination, Counter())[t.income_class] += t.riders
    for node, c in votes.items():
        stop_class[node] = sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
    hubs = set(net.hubs)
    beta = dict(zip(instance.legs, instance.leg_investment()))
    features = []
    for k, node in enumerate(net.nodes):
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [float(xy[k, 0]), float(xy[k, 1])]},
            "properties": {"id": node, "hub": node in hubs, "income_class": stop_class.get(node)},
        })
    for a, b in design.sorted_legs():
        i, j = instance.leg_nodes((a, b))
        features.append({
            "type": "Feature",
            "geometry": {"type": "LineString",
                         "coordinates": [[float(xy[i, 0]), float(xy[i, 1])], [float(xy[j, 0]), float(xy[j, 1])]]},
            "properties": {"from": net.hubs[a], "to": net.hubs[b], "investment": float(beta[(a, b)])},
        })
    return {"type": "FeatureCollection", "features": features}
