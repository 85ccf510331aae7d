"""Command-line interface.

Exit codes: 0 converged (or success), 1 configuration / usage error,
2 ran but hit ``max_iters``, 3 diverged (non-finite values).
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .config import ConfigError, build_run_config, build_sweep_grid, load_document
from .fom import SCHEMES, solve_fd, write_solution_csv
from .problem import BvpSpec, analytic_solution
from .schwarz import Status, l2_rel_error, run

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_MAX_ITERS = 2
EXIT_DIVERGED = 3

_STATUS_EXIT = {
    Status.CONVERGED: EXIT_OK,
    Status.MAX_ITERS: EXIT_MAX_ITERS,
    Status.DIVERGED: EXIT_DIVERGED,
}


class _Parser(argparse.ArgumentParser):
    # usage errors share the configuration-error exit code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _err(msg):
    print(f"error: {msg}", file=sys.stderr)


def cmd_solve(args) -> int:
    doc = load_document(args.config) if args.config else None
    config = build_run_config(doc, args.set)
    if args.snapshots:
        wanted = [s for s in args.snapshots.split(",") if s]
        config.snapshot_iters = sorted({int(s) for s in wanted if s != "final"})
    else:
        wanted = ["final"] + [int(i) for i in config.snapshot_iters]
    out = Path(args.out)
    rid = args.run_id or experiments.run_id(config)

    def progress(n, recs):
        if not args.quiet:
            errs = " ".join(f"[{r.subdomain}] s={r.schwarz_err:.3e} l2={r.l2_err:.3e}" for r in recs)
            print(f"iter {n}: {errs}", file=sys.stderr)

    result = run(config, out_dir=out, on_iteration=progress)
    spec = config.spec
    profiles = experiments.pointwise_error_profile(
        [(s.interval, s.evaluate) for s in result.solvers],
        lambda x: analytic_solution(spec, x),
    )
    experiments.write_profile_csv(out / f"profile_{rid}.csv", profiles)
    experiments.snapshot_figures(result, wanted, out, rid)
    print(json.dumps({"status": result.status.value, "iterations": result.iterations,
                      "final_l2_errors": result.summary()["final_l2_errors"]}))
    return _STATUS_EXIT[result.status]


def cmd_fom(args) -> int:
    if args.pe <= 0:
        raise ConfigError("pe: must be positive", "pe")
    if args.n_cells < 2:
        raise ConfigError("n_cells: must be >= 2", "n_cells")
    spec = BvpSpec.from_peclet(args.pe)
    grid = solve_fd(spec, (0.0, 1.0), args.n_cells, 0.0, 0.0, args.scheme)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_solution_csv(out, grid.x, grid.values)
    err = l2_rel_error(grid.values, analytic_solution(spec, grid.x))
    print(f"l2_rel_error {err:.6e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid = build_sweep_grid(load_document(args.grid), args.set)
    if args.workers < 1:
        raise ConfigError("workers: must be >= 1", "workers")
    log = None if args.quiet else (lambda m: print(m, file=sys.stderr))
    try:
        cells = experiments.run_sweep(grid, args.out, workers=args.workers, force=args.force, log=log)
    except FileExistsError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    n_runs = sum(len(c.runs) for c in cells)
    print(f"{len(cells)} cells, {n_runs} runs, "
          f"{sum(c.converged for c in cells)} cells converged")
    return EXIT_OK


def cmd_report(args) -> int:
    root = Path(args.sweep_dir)
    raw_path = root / "sweep" / "raw_runs.jsonl"
    if not raw_path.exists():
        raise ConfigError(f"sweep_dir: no raw_runs.jsonl under {root / 'sweep'}", "sweep_dir")
    raw = experiments.read_raw_runs(raw_path)
    if args.kind == "pareto":
        cells = experiments.group_cells(raw)
        for pe in sorted({c.pe for c in cells}):
            path = root / "sweep" / f"pareto_pe{pe:g}.csv"
            rows = experiments.pareto_export([c for c in cells if c.pe == pe], path, args.p_o)
            print(f"{path}: {len(rows)} rows")
        return EXIT_OK
    if not args.run_id:
        raise ConfigError("run_id: required for profile reports", "run_id")
    match = [r for r in raw if r["run_id"] == args.run_id]
    if not match:
        raise ConfigError(f"run_id: {args.run_id!r} not found in {raw_path}", "run_id")
    out = Path(args.out) if args.out else root / f"profile_{args.run_id}.csv"
    profiles = experiments.profile_from_raw(match[0])
    experiments.write_profile_csv(out, profiles)
    worst = max((float(np.max(e)) for _, e in profiles if len(e)), default=0.0)
    print(f"{out}: max rel err {worst:.4e}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="schwarz-pinn", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="run one coupled Schwarz solve")
    s.add_argument("config", nargs="?", help="JSON run config (defaults if omitted)")
    s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config field (repeatable)")
    s.add_argument("--out", default="schwarz_out", help="output directory")
    s.add_argument("--run-id", help="tag used in profile/snapshot file names")
    s.add_argument("--snapshots", help="comma-separated iterations to dump, e.g. 1,10,final")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_solve)

    f = sub.add_parser("fom", help="single-domain finite-difference solve")
    f.add_argument("--pe", type=float, default=10.0)
    f.add_argument("--n-cells", type=int, default=1024)
    f.add_argument("--scheme", choices=SCHEMES, default="central")
    f.add_argument("--out", required=True, help="output CSV (x,u)")
    f.set_defaults(func=cmd_fom)

    w = sub.add_parser("sweep", help="run a parameter sweep")
    w.add_argument("grid", help="JSON sweep config")
    w.add_argument("--out", required=True, help="output directory")
    w.add_argument("--workers", type=int, default=1)
    w.add_argument("--force", action="store_true", help="overwrite an existing sweep")
    w.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    w.add_argument("--quiet", action="store_true")
    w.set_defaults(func=cmd_sweep)

    r = sub.add_parser("report", help="export Pareto or profile CSVs from a sweep")
    r.add_argument("kind", choices=("pareto", "profile"))
    r.add_argument("--sweep-dir", required=True)
    r.add_argument("--p-o", type=float, default=0.35)
    r.add_argument("--run-id")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG
    except ValueError as exc:
        _err(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
