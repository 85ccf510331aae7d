"""Parameter sweeps, Pareto slices, error profiles and snapshot dumps.

Output layout of ``run_sweep(grid, out_dir)``::

    out_dir/sweep/raw_runs.jsonl             one JSON object per run
    out_dir/sweep/pe<Pe>/<DBC>_<data>/iters.csv
    out_dir/sweep/pe<Pe>/<DBC>_<data>/l2.csv
    out_dir/sweep/pareto_pe<Pe>.csv

``iters.csv`` has one row per (n_d, p_o) cell holding the best (smallest)
iteration count over seeds, or -1 with ``converged=false`` when no seed
converged.  ``l2.csv`` holds the final subdomain-averaged L2 error of the
seed reported in ``iters.csv`` (the lowest-error seed if none converged).
"""
from __future__ import annotations

import csv
import itertools
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .problem import BvpSpec, analytic_solution
from .schwarz import SchwarzConfig, Status, run

__all__ = [
    "SweepGrid",
    "CellResult",
    "run_sweep",
    "run_cell",
    "panel_dir",
    "run_id",
    "pointwise_error_profile",
    "write_profile_csv",
    "pareto_export",
    "snapshot_figures",
    "read_raw_runs",
    "profile_from_raw",
    "SENTINEL",
    "PROFILE_TRIM",
]

SENTINEL = -1
PROFILE_TRIM = (0.025, 0.975)
PROFILE_SAMPLES = 129
PARETO_COLUMNS = ("n_d", "dbc", "data", "iterations", "l2_mean", "converged", "label")


@dataclass
class SweepGrid:
    """Axes of a sweep; every combination is run once per seed.

    ``base`` holds ``SchwarzConfig`` fields shared by all cells.  With
    ``prune_seeds`` the seeds of a cell run in order and each later seed is
    capped one iteration below the best count so far, since it could not
    lower the reported minimum otherwise (pruned runs are flagged in the
    raw file).
    """

    n_d: list = field(default_factory=lambda: [2, 3, 4, 5])
    p_o: list = field(default_factory=lambda: [round(0.05 * i, 2) for i in range(1, 11)])
    dbc_modes: list = field(default_factory=lambda: ["WDBC", "MDBC", "SDBC"])
    data: list = field(default_factory=lambda: [False, True])
    pe: list = field(default_factory=lambda: [10.0, 100.0])
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    prune_seeds: bool = False
    base: dict = field(default_factory=dict)

    def __post_init__(self):
        if isinstance(self.seeds, int) and not isinstance(self.seeds, bool):
            self.seeds = list(range(self.seeds))
        for name in ("n_d", "p_o", "dbc_modes", "data", "pe", "seeds"):
            v = getattr(self, name)
            if not isinstance(v, (list, tuple)) or len(v) == 0:
                raise ValueError(f"{name}: axis must be a nonempty list")
            setattr(self, name, list(v))
        if any(not isinstance(d, bool) for d in self.data):
            raise ValueError("data: entries must be true/false")
        for key in ("n_d", "p_o", "dbc_mode", "use_data_loss", "pe", "seed"):
            if key in self.base:
                raise ValueError(f"base: {key!r} is a sweep axis, not a base field")
        # validates every axis value through the run config
        for cell in self.cells():
            for seed in self.seeds:
                self.config(cell, seed)

    def cells(self):
        """Cell keys ``(pe, dbc, data, n_d, p_o)`` in a fixed order."""
        return list(itertools.product(self.pe, self.dbc_modes, self.data, self.n_d, self.p_o))

    def config(self, cell, seed, max_iters=None) -> SchwarzConfig:
        pe, dbc, data, n_d, p_o = cell
        kw = dict(self.base)
        if max_iters is not None:
            kw["max_iters"] = max_iters
        return SchwarzConfig(
            pe=float(pe), n_d=int(n_d), p_o=float(p_o), dbc_mode=str(dbc).upper(),
            use_data_loss=bool(data), seed=int(seed), **kw,
        )

    def __len__(self):
        return len(self.cells()) * len(self.seeds)


def _data_label(data: bool) -> str:
    return "data" if data else "nodata"


def _pe_label(pe) -> str:
    return f"pe{float(pe):g}"


def panel_dir(out_dir, pe, dbc, data) -> Path:
    return Path(out_dir) / "sweep" / _pe_label(pe) / f"{str(dbc).upper()}_{_data_label(data)}"


def run_id(config: SchwarzConfig) -> str:
    return (
        f"{_pe_label(config.pe)}_nd{config.n_d}_po{config.p_o:g}_"
        f"{config.dbc_mode.upper()}_{_data_label(config.use_data_loss)}_s{config.seed}"
    )


@dataclass
class CellResult:
    pe: float
    dbc: str
    data: bool
    n_d: int
    p_o: float
    runs: list

    @property
    def best(self):
        """The run reported for this cell (see module docstring)."""
        ok = [r for r in self.runs if r["status"] == Status.CONVERGED.value]
        if ok:
            return min(ok, key=lambda r: (r["iterations"], r["seed"]))
        finite = [r for r in self.runs if r["l2_mean"] is not None and math.isfinite(r["l2_mean"])]
        if finite:
            return min(finite, key=lambda r: (r["l2_mean"], r["seed"]))
        return self.runs[0] if self.runs else None

    @property
    def converged(self) -> bool:
        b = self.best
        return b is not None and b["status"] == Status.CONVERGED.value

    @property
    def iterations(self) -> int:
        return self.best["iterations"] if self.converged else SENTINEL

    @property
    def l2_mean(self):
        b = self.best
        return None if b is None else b["l2_mean"]

    @property
    def n_converged(self) -> int:
        return sum(r["status"] == Status.CONVERGED.value for r in self.runs)


def pointwise_error_profile(evaluators, reference, trim=PROFILE_TRIM, n_samples=512):
    """Relative pointwise error per subdomain inside the trim window.

    ``evaluators`` is a list of ``(interval, u_hat)``; ``reference(x)`` gives
    the exact values.  Returns ``[(x, rel_err), ...]`` (empty arrays for
    subdomains outside the window).
    """
    lo, hi = trim
    out = []
    for (a, b), u_hat in evaluators:
        a2, b2 = max(a, lo), min(b, hi)
        if a2 >= b2:
            out.append((np.empty(0), np.empty(0)))
            continue
        x = np.linspace(a2, b2, n_samples)
        ref = np.asarray(reference(x), dtype=float)
        if np.any(ref == 0.0):
            raise ValueError("reference vanishes inside the trim window")
        err = np.abs(np.asarray(u_hat(x), dtype=float) - ref) / np.abs(ref)
        out.append((x, err))
    return out


def write_profile_csv(path, profiles) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["subdomain", "x", "rel_err"])
        for i, (x, e) in enumerate(profiles):
            for xi, ei in zip(x, e):
                w.writerow([i, repr(float(xi)), repr(float(ei))])


def _profile_samples(result, n_samples=PROFILE_SAMPLES):
    samples = []
    for s in result.solvers:
        a, b = s.interval
        a2, b2 = max(a, PROFILE_TRIM[0]), min(b, PROFILE_TRIM[1])
        x = np.linspace(a2, b2, n_samples) if a2 < b2 else np.empty(0)
        u = np.asarray(s.evaluate(x), dtype=float) if x.size else x
        samples.append({"interval": [a, b], "x": x.tolist(), "u": u.tolist()})
    return samples


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def run_cell(grid: SweepGrid, cell):
    """Run every seed of one cell; returns raw run dicts."""
    runs, best = [], None
    for seed in grid.seeds:
        cap = None
        if grid.prune_seeds and best is not None:
            cap = best - 1
            if cap < 1:
                break
        cfg = grid.config(cell, seed, max_iters=cap)
        t0 = time.perf_counter()
        try:
            res = run(cfg)
            l2 = res.final_l2_errors
            rec = {
                "status": res.status.value,
                "iterations": res.iterations,
                "final_l2_errors": [_jsonable(v) for v in l2],
                "l2_mean": _jsonable(float(np.mean(l2))) if l2 else None,
                "final_schwarz_errors": [_jsonable(v) for v in res.final_schwarz_errors],
                "samples": _profile_samples(res),
                "message": res.message,
            }
        except Exception as exc:  # a failing cell must not stop the sweep
            rec = {"status": "Error", "iterations": 0, "final_l2_errors": [], "l2_mean": None,
                   "final_schwarz_errors": [], "samples": [], "message": repr(exc)}
        rec.update({
            "run_id": run_id(cfg), "pe": cfg.pe, "dbc": cfg.dbc_mode, "data": cfg.use_data_loss,
            "n_d": cfg.n_d, "p_o": cfg.p_o, "seed": cfg.seed, "pruned": cap is not None,
            "max_iters": cfg.max_iters, "seconds": round(time.perf_counter() - t0, 3),
        })
        if isinstance(rec["l2_mean"], str):
            rec["l2_mean"] = float(rec["l2_mean"])
        runs.append(rec)
        if rec["status"] == Status.CONVERGED.value:
            best = rec["iterations"] if best is None else min(best, rec["iterations"])
    return runs


def _cell_task(args):
    grid, cell = args
    return run_cell(grid, cell)


def _write_panel(out_dir, cells):
    pe, dbc, data = cells[0].pe, cells[0].dbc, cells[0].data
    d = panel_dir(out_dir, pe, dbc, data)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / "iters.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n_d", "p_o", "iterations", "converged", "n_seeds_converged", "n_seeds"])
        for c in cells:
            w.writerow([c.n_d, f"{c.p_o:g}", c.iterations, str(c.converged).lower(),
                        c.n_converged, len(c.runs)])
    with open(d / "l2.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["n_d", "p_o", "l2_mean", "converged"])
        for c in cells:
            l2 = "" if c.l2_mean is None else repr(float(c.l2_mean))
            w.writerow([c.n_d, f"{c.p_o:g}", l2, str(c.converged).lower()])


def pareto_export(cells, path, p_o=0.35) -> list:
    """Write the fixed-overlap slice as Pareto rows; returns the rows."""
    rows = []
    for c in cells:
        if not math.isclose(c.p_o, p_o, abs_tol=1e-9):
            continue
        label = f"nd{c.n_d}_{c.dbc}_{_data_label(c.data)}"
        rows.append([c.n_d, c.dbc, _data_label(c.data), c.iterations,
                     "" if c.l2_mean is None else repr(float(c.l2_mean)),
                     str(c.converged).lower(), label])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(PARETO_COLUMNS)
        w.writerows(rows)
    return rows


def group_cells(raw_runs):
    """Collect raw run dicts into ``CellResult`` objects (input order kept)."""
    cells = {}
    for r in raw_runs:
        key = (float(r["pe"]), r["dbc"], bool(r["data"]), int(r["n_d"]), float(r["p_o"]))
        if key not in cells:
            cells[key] = CellResult(*key, runs=[])
        cells[key].runs.append(r)
    return list(cells.values())


def write_reports(out_dir, cells, p_o=0.35):
    """Heatmap panels plus per-Pe Pareto files."""
    root = Path(out_dir) / "sweep"
    panels = {}
    for c in cells:
        panels.setdefault((c.pe, c.dbc, c.data), []).append(c)
    for group in panels.values():
        _write_panel(out_dir, group)
    for pe in sorted({c.pe for c in cells}):
        pareto_export([c for c in cells if c.pe == pe], root / f"pareto_{_pe_label(pe)}.csv", p_o)


def run_sweep(grid: SweepGrid, out_dir, workers: int = 1, force: bool = False, log=None):
    """Run all cells of ``grid`` and write the report files.

    Refuses to write into an existing ``sweep`` directory unless ``force``.
    Cells may run in a process pool; outputs do not depend on ``workers``.
    """
    root = Path(out_dir) / "sweep"
    if root.exists() and not force:
        raise FileExistsError(f"{root} already exists (use force to overwrite)")
    root.mkdir(parents=True, exist_ok=True)
    cells = grid.cells()
    tasks = [(grid, c) for c in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_cell_task, tasks))
    else:
        results = []
        for t in tasks:
            results.append(_cell_task(t))
            if log is not None:
                last = results[-1]
                log(f"cell {t[1]}: " + ", ".join(f"s{r['seed']}={r['status']}@{r['iterations']}" for r in last))
    raw = [r for runs in results for r in runs]
    with open(root / "raw_runs.jsonl", "w", encoding="utf-8") as fh:
        for r in raw:
            fh.write(json.dumps(r) + "\n")
    grouped = group_cells(raw)
    write_reports(out_dir, grouped)
    return grouped


def read_raw_runs(path) -> list:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def profile_from_raw(record, trim=PROFILE_TRIM):
    """Pointwise relative error profile of a stored run (analytic reference)."""
    spec = BvpSpec.from_peclet(record["pe"])
    out = []
    lo, hi = trim
    for s in record["samples"]:
        x = np.asarray(s["x"], dtype=float)
        u = np.asarray(s["u"], dtype=float)
        keep = (x >= lo) & (x <= hi)
        x, u = x[keep], u[keep]
        ref = analytic_solution(spec, x)
        out.append((x, np.abs(u - ref) / np.abs(ref)))
    return out


def snapshot_figures(result, iterations, out_dir, rid="run"):
    """Write ``snap_<rid>_<iter>.csv`` (subdomain, x, u, u_ref) per iteration.

    ``"final"`` stands for the last iteration.  Iterations that were not
    captured during the run are skipped with a warning.
    """
    spec = result.config.spec
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for it in iterations:
        n = result.iterations if it == "final" else int(it)
        snap = result.snapshots.get(n)
        if snap is None:
            warnings.warn(f"iteration {it} was not captured; skipped", stacklevel=2)
            continue
        path = out_dir / f"snap_{rid}_{n}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["subdomain", "x", "u", "u_ref"])
            for i, (x, u) in enumerate(snap):
                ref = analytic_solution(spec, np.clip(x, 0.0, 1.0))
                for xi, ui, ri in zip(x, u, ref):
                    w.writerow([i, repr(float(xi)), repr(float(ui)), repr(float(ri))])
        paths.append(path)
    return paths
