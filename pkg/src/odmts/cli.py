"""``odmts`` command line."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from .decomposition import SolveConfig, solve
from .generator import GenSpec, generate
from .instance import InstanceError, dump_instance, instance_to_dict, load_instance
from .master import MasterError
from .oracle import OracleLimitError, enumerate_bilevel, table_csv
from .report import (build_report, design_from_result, dumps, report_csv, report_text,
                     result_dict, to_geojson)

EXIT_OK, EXIT_USAGE, EXIT_SOLVE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eps", type=float, default=1e-6, help="absolute UB-LB tolerance")
    p.add_argument("--time-limit", type=float, default=7200.0, help="seconds")
    p.add_argument("--max-iterations", type=int, default=None)
    p.add_argument("--eta", type=float, default=0.5, help="core point value for Pareto cuts")
    p.add_argument("--no-strengthen", action="store_true")
    p.add_argument("--no-lifting", action="store_true")
    p.add_argument("--no-pareto", action="store_true")
    p.add_argument("--no-direct-preprocess", action="store_true")
    p.add_argument("--backend", default="auto", help="auto, builtin or external:highs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)


def _config(args) -> SolveConfig:
    if not 0 < args.eta < 1:
        raise UsageError("--eta must lie strictly between 0 and 1")
    if args.threads < 1:
        raise UsageError("--threads must be positive")
    if not (args.backend == "auto" or args.backend == "builtin"
            or args.backend in ("external:highs", "external:scipy")):
        raise UsageError(f"unknown backend {args.backend!r}")
    return SolveConfig(
        eps=args.eps, time_limit=args.time_limit, max_iterations=args.max_iterations,
        eta=args.eta, strengthen=not args.no_strengthen, lifting=not args.no_lifting,
        pareto=not args.no_pareto, direct_preprocess=not args.no_direct_preprocess,
        backend=args.backend, threads=args.threads, seed=args.seed)


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def _instance(path: str):
    try:
        return load_instance(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def _instance_for_result(args, result: dict):
    path = args.instance or result.get("instance")
    if not path:
        raise UsageError("result file does not name its instance; pass --instance")
    return _instance(path)


def cmd_solve(args) -> int:
    inst = _instance(args.instance)
    config = _config(args)
    run = solve(inst, config)
    result = result_dict(inst, run, args.instance, asdict(config))
    out = args.out or str(Path(args.instance).with_suffix("")) + ".result.json"
    _write(dumps(result), out)
    log_path = args.log or (str(Path(out).with_suffix("")) + ".log.jsonl" if out != "-" else None)
    if log_path:
        lines = run.log_lines(timing=args.log_timing)
        Path(log_path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    sys.stderr.write(f"{run.status}: objective {run.incumbent_objective:.6f} "
                     f"after {len(run.iterations)} iterations\n")
    return EXIT_OK if run.incumbent is not None else EXIT_SOLVE


def cmd_oracle(args) -> int:
    inst = _instance(args.instance)
    res = enumerate_bilevel(inst, args.max_hubs)
    _write(table_csv(inst, res), args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        spec = GenSpec.from_json(args.spec) if args.spec else GenSpec()
    except OSError as exc:
        raise UsageError(f"cannot read {args.spec}: {exc.strerror}") from None
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad generator spec: {exc}") from None
    if args.seed is not None:
        spec.seed = args.seed
    inst = generate(spec)
    if args.out in (None, "-"):
        sys.stdout.write(json.dumps(instance_to_dict(inst), indent=1) + "\n")
    else:
        dump_instance(inst, args.out)
    return EXIT_OK


def cmd_report(args) -> int:
    result = _read_json(args.result)
    inst = _instance_for_result(args, result)
    baseline = None
    if args.baseline:
        baseline = design_from_result(inst, _read_json(args.baseline))
    rep = build_report(inst, result, baseline)
    if args.out:
        _write(report_csv(rep), args.out)
    sys.stdout.write(report_text(rep))
    return EXIT_OK


def cmd_ablate(args) -> int:
    inst = _instance(args.instance)
    enhanced = _config(args)
    variants = [("base", SolveConfig.base(eps=enhanced.eps, time_limit=enhanced.time_limit,
                                          max_iterations=enhanced.max_iterations,
                                          backend=enhanced.backend, threads=enhanced.threads)),
                ("enhanced", enhanced)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "status", "iterations", "iterations_to_gap", "objective",
                "wall_time", "gap_trajectory"])
    status = EXIT_OK
    for name, cfg in variants:
        t0 = time.perf_counter()
        run = solve(inst, cfg)
        wall = time.perf_counter() - t0
        traj = ";".join(f"{r.gap:.6g}" for r in run.iterations)
        w.writerow([name, run.status, len(run.iterations), run.iterations_to_gap(args.gap),
                    f"{run.incumbent_objective:.6f}", f"{wall:.3f}", traj])
        if run.incumbent is None:
            status = EXIT_SOLVE
    _write(buf.getvalue(), args.out)
    return status


def cmd_geojson(args) -> int:
    result = _read_json(args.result)
    inst = _instance_for_result(args, result)
    design = design_from_result(inst, result)
    _write(json.dumps(to_geojson(inst, design), indent=1) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="odmts", description="On-demand multimodal transit network design")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve an instance by decomposition")
    s.add_argument("instance")
    _solver_flags(s)
    s.add_argument("--out", help="result JSON (default: <instance>.result.json, '-' for stdout)")
    s.add_argument("--log", help="run log JSONL (default: next to the result)")
    s.add_argument("--log-timing", action="store_true", help="include wall_time in the run log")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("oracle", help="enumerate every design of a small instance")
    s.add_argument("instance")
    s.add_argument("--max-hubs", type=int, default=4)
    s.add_argument("--out")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("gen", help="generate a synthetic instance")
    s.add_argument("--spec", help="generator spec JSON")
    s.add_argument("--seed", type=int)
    s.add_argument("--out")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("report", help="summary tables for a result file")
    s.add_argument("result")
    s.add_argument("--instance")
    s.add_argument("--baseline", help="result JSON of a reference design")
    s.add_argument("--out", help="write the tables as CSV")
    s.set_defaults(func=cmd_report)

    s = sub.add_parser("ablate", help="compare base and enhanced configurations")
    s.add_argument("instance")
    _solver_flags(s)
    s.add_argument("--gap", type=float, default=0.01, help="relative gap for iterations_to_gap")
    s.add_argument("--out")
    s.set_defaults(func=cmd_ablate)

    s = sub.add_parser("export-geojson", help="export a design as GeoJSON")
    s.add_argument("result")
    s.add_argument("--instance")
    s.add_argument("--out")
    s.set_defaults(func=cmd_geojson)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, InstanceError, OracleLimitError) as exc:
        sys.stderr.write(f"odmts {args.command}: {exc}\n")
        return EXIT_USAGE
    except (MasterError, RuntimeError) as exc:
        sys.stderr.write(f"odmts {args.command}: solve failed: {exc}\n")
        return EXIT_SOLVE


if __name__ == "__main__":
    sys.exit(main())
