"""Command line front end: generate | solve | bench | profile.

Exit codes: 0 success (solve: proven optimal), 2 usage error (argparse),
3 the solver hit its time limit, 4 the instance is infeasible, 1 any
other error (I/O, malformed files). The default solve time limit is 600
seconds, overridable by the EMSP_TIME_LIMIT environment variable and then
by --time-limit.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .cuts import (ALGO_FORCED, ALGO_REPEATED, LP_ALL, LP_NONE, LP_ROOT,
                   InfeasibleInstanceError, SolverConfig, solve)
from .instances import FormatError, GeneratorSpec, generate, parse_instance, serialize_instance

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_TIME_LIMIT = 3
EXIT_INFEASIBLE = 4

ENV_TIME_LIMIT = "EMSP_TIME_LIMIT"

_ALGOS = {"repeated": ALGO_REPEATED, "forced": ALGO_FORCED}
_MODES = {"none": LP_NONE, "root": LP_ROOT, "all": LP_ALL}

BENCH_COLUMNS = ["instance", "family", "n", "coords", "seed", "config", "status",
                 "value", "upper_bound", "iterations", "integer_cuts", "lp_cuts",
                 "wall_time_s"]
PROFILE_COLUMNS = ["config", "time_s", "fraction"]


def _default_time_limit() -> float:
    raw = os.environ.get(ENV_TIME_LIMIT)
    if raw:
        try:
            return float(raw)
        except ValueError:
            pass
    return 600.0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emaxsum",
                                     description="Euclidean max-sum cutting-plane solver")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a seeded benchmark instance")
    gen.add_argument("family", choices=["cdp", "gdp_f", "gdp_v", "blmsdp"])
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--coords", type=int, default=2)
    gen.add_argument("--ratio", type=float, default=0.2)
    gen.add_argument("--phi", type=float, default=0.5)
    gen.add_argument("--p", type=int, default=None)
    gen.add_argument("--delta", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True)

    sol = sub.add_parser("solve", help="solve one instance file")
    sol.add_argument("instance")
    sol.add_argument("--algorithm", choices=sorted(_ALGOS), default="repeated")
    sol.add_argument("--lp-tangents", choices=sorted(_MODES), default="none")
    sol.add_argument("--time-limit", type=float, default=None,
                     help=f"seconds (default 600, or ${ENV_TIME_LIMIT})")
    sol.add_argument("--tol", type=float, default=1e-9)
    sol.add_argument("--report", default=None, help="write a key=value report here")
    sol.add_argument("--verbose", action="store_true", help="print one line per iteration")

    ben = sub.add_parser("bench", help="run configurations over a directory of instances")
    ben.add_argument("directory")
    ben.add_argument("--configs", default="repeated:none,forced:none",
                     help="comma-separated algorithm:mode labels, e.g. repeated:root")
    ben.add_argument("--pattern", default="*.emsp")
    ben.add_argument("--time-limit", type=float, default=None)
    ben.add_argument("--tol", type=float, default=1e-9)
    ben.add_argument("--jobs", type=int, default=1)
    ben.add_argument("--out", required=True)

    pro = sub.add_parser("profile", help="cumulative solved fraction over a time grid")
    pro.add_argument("results", help="CSV written by bench")
    pro.add_argument("--out", required=True)
    pro.add_argument("--points", type=int, default=50)
    return parser


def _parse_config_label(label: str) -> SolverConfig:
    try:
        algo, _, mode = label.partition(":")
        return SolverConfig(algorithm=_ALGOS[algo], lp_tangents=_MODES[mode])
    except KeyError as exc:
        raise ValueError(f"bad config label {label!r}; expected algorithm:mode "
                         f"with algorithm in {sorted(_ALGOS)} and mode in {sorted(_MODES)}") from exc


def cmd_generate(args) -> int:
    spec = GeneratorSpec(family=args.family, n=args.n, coords=args.coords,
                         ratio=args.ratio, phi=args.phi, p=args.p,
                         delta=args.delta, seed=args.seed)
    inst = generate(spec)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(serialize_instance(inst))
    print(f"wrote {inst.name or args.out} (n={inst.n})")
    return EXIT_OK


def _fmt_value(v) -> str:
    if v is None:
        return ""
    f = float(v)
    if math.isinf(f):
        return "inf" if f > 0 else "-inf"
    return f"{f:.12g}"


def cmd_solve(args) -> int:
    with open(args.instance, "r", encoding="utf-8") as fh:
        inst = parse_instance(fh.read())
    limit = args.time_limit if args.time_limit is not None else _default_time_limit()
    cfg = SolverConfig(algorithm=_ALGOS[args.algorithm],
                       lp_tangents=_MODES[args.lp_tangents],
                       time_limit_s=limit, tolerance=args.tol)
    log = print if args.verbose else None
    try:
        report = solve(inst, cfg, log=log)
    except InfeasibleInstanceError as exc:
        print(f"infeasible: {exc}")
        return EXIT_INFEASIBLE
    print(f"instance {inst.name or args.instance} (n={inst.n})")
    print(f"algorithm {cfg.algorithm}, lp tangents {cfg.lp_tangents}")
    print(f"status {report.status}")
    print(f"value {_fmt_value(report.best_value)}")
    print(f"upper_bound {_fmt_value(report.upper_bound)}")
    print(f"iterations {report.iterations}, integer cuts {report.integer_cuts}, "
          f"lp cuts {report.lp_cuts}")
    print(f"wall_time_s {report.wall_time_s:.3f}")
    if args.report:
        lines = [
            f"instance={inst.name or args.instance}",
            f"algorithm={cfg.algorithm}",
            f"lp_tangents={cfg.lp_tangents}",
            f"status={report.status}",
            f"value={_fmt_value(report.best_value)}",
            f"upper_bound={_fmt_value(report.upper_bound)}",
            f"iterations={report.iterations}",
            f"integer_cuts={report.integer_cuts}",
            f"lp_cuts={report.lp_cuts}",
            f"wall_time_s={report.wall_time_s:.6f}",
        ]
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return EXIT_OK if report.status == "optimal" else EXIT_TIME_LIMIT


def _bench_one(task) -> dict:
    path, label, limit, tol = task
    with open(path, "r", encoding="utf-8") as fh:
        inst = parse_instance(fh.read())
    cfg = _parse_config_label(label)
    cfg = SolverConfig(algorithm=cfg.algorithm, lp_tangents=cfg.lp_tangents,
                       time_limit_s=limit, tolerance=tol)
    row = {
        "instance": inst.name or os.path.basename(path),
        "family": inst.meta.get("family", ""),
        "n": inst.n,
        "coords": inst.points.dim if inst.points is not None else 0,
        "seed": inst.meta.get("seed", ""),
        "config": label,
    }
    try:
        report = solve(inst, cfg)
    except InfeasibleInstanceError:
        row.update(status="infeasible", value="", upper_bound="", iterations=0,
                   integer_cuts=0, lp_cuts=0, wall_time_s=0.0)
        return row
    row.update(status=report.status, value=_fmt_value(report.best_value),
               upper_bound=_fmt_value(report.upper_bound),
               iterations=report.iterations, integer_cuts=report.integer_cuts,
               lp_cuts=report.lp_cuts, wall_time_s=f"{report.wall_time_s:.6f}")
    return row


def cmd_bench(args) -> int:
    import glob as globmod

    paths = sorted(globmod.glob(os.path.join(args.directory, args.pattern)))
    if not paths:
        print(f"no instances matching {args.pattern} under {args.directory}",
              file=sys.stderr)
        return EXIT_ERROR
    labels = [lbl.strip() for lbl in args.configs.split(",") if lbl.strip()]
    for lbl in labels:
        _parse_config_label(lbl)
    limit = args.time_limit if args.time_limit is not None else _default_time_limit()
    tasks = [(path, lbl, limit, args.tol) for path in paths for lbl in labels]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_bench_one, tasks))
    else:
        rows = [_bench_one(t) for t in tasks]
    rows.sort(key=lambda r: (r["instance"], r["config"]))
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    print(f"wrote {len(rows)} records to {args.out}")
    return EXIT_OK


def cmd_profile(args) -> int:
    with open(args.results, "r", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print("no records in input CSV", file=sys.stderr)
        return EXIT_ERROR
    configs = sorted({r["config"] for r in rows})
    solved_times = {
        cfg: np.array([float(r["wall_time_s"]) for r in rows
                       if r["config"] == cfg and r["status"] == "optimal"])
        for cfg in configs
    }
    totals = {cfg: sum(1 for r in rows if r["config"] == cfg) for cfg in configs}
    t_hi = max((float(times.max()) for times in solved_times.values() if times.size),
               default=1.0)
    t_hi = max(t_hi, 1.0)
    grid = np.logspace(math.log10(1e-3), math.log10(t_hi), args.points)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(PROFILE_COLUMNS)
        for cfg in configs:
            times = solved_times[cfg]
            for t in grid:
                frac = float((times <= t).sum()) / totals[cfg] if totals[cfg] else 0.0
                writer.writerow([cfg, f"{t:.6g}", f"{frac:.6g}"])
    print(f"wrote profiles for {len(configs)} configurations to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "bench":
            return cmd_bench(args)
        return cmd_profile(args)
    except (OSError, FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
