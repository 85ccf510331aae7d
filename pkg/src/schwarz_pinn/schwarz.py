"""Multiplicative overlapping Schwarz coupling of PINN and FOM subdomains.

One sweep visits the subdomains left to right.  Subdomain ``i`` takes its
left Dirichlet value from subdomain ``i-1`` as already updated in the same
sweep and its right value from subdomain ``i+1`` as left by the previous
sweep; before the first sweep every trace is 0.  A run stops when, after a
sweep, every subdomain has both

* a Schwarz relative change below ``delta_schwarz``, and
* an L2 relative error below ``tol_l2`` against the reference solution,

or when ``max_iters`` sweeps have been done.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from enum import Enum
from pathlib import Path

import numpy as np

from .autodiff import NonFiniteError
from .fom import (
    DEFAULT_H,
    SCHEMES,
    FomGrid,
    SingularMatrixError,
    cells_for,
    choose_scheme,
    interpolate,
    make_snapshot,
    reference_solution,
    solve_fd,
)
from .network import init_params
from .optim import Adam
from .pinn import DbcMode, LossWeights, SubdomainPinn, train_epochs, transform_solution
from .problem import BvpSpec, analytic_solution, decompose, sample_collocation

__all__ = [
    "Status",
    "SchwarzConfig",
    "PinnSolver",
    "FomSolver",
    "IterationRecord",
    "SchwarzResult",
    "schwarz_rel_error",
    "l2_rel_error",
    "check_convergence",
    "run",
    "TRACE_COLUMNS",
]

SOLVER_KINDS = ("pinn", "fom")
TRACE_COLUMNS = (
    "iter", "subdomain", "solver", "schwarz_err", "l2_err", "l2_err_analytic",
    "g_left", "g_right",
)


class Status(str, Enum):
    CONVERGED = "Converged"
    MAX_ITERS = "MaxItersExceeded"
    DIVERGED = "Diverged"
    RUNNING = "Running"


@dataclass
class SchwarzConfig:
    """Everything that determines a coupled run (and nothing else).

    ``solvers`` is either one kind for all subdomains or one per subdomain.
    ``alpha_r`` applies to every PINN; ``seed`` drives network initialisation,
    ``collocation_seed`` the (optional) scrambling of the collocation points.
    """

    pe: float = 10.0
    n_d: int = 2
    p_o: float = 0.2
    solvers: list = field(default_factory=lambda: ["pinn"])
    dbc_mode: str = "WDBC"
    use_data_loss: bool = False
    alpha_r: float = 0.25
    epochs_per_iter: int = 1024
    max_iters: int = 100
    delta_schwarz: float = 1e-3
    tol_l2: float = 5e-3
    reference: str = "fom_grid"
    seed: int = 0
    n_collocation: int = 1024
    collocation_seed: int = 0
    layer_sizes: list = field(default_factory=lambda: [1, 20, 20, 1])
    mu: float = 1.0
    k: float = 1.0
    lr: float = 1e-3
    linear_output: bool = False
    mdbc_literal: bool = False
    reset_adam: bool = False
    fom_h: float = DEFAULT_H
    fom_scheme: str = "auto"
    snapshot_points: int = 1024
    snapshot_iters: list = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Raise ``ValueError`` naming the first offending field."""

        def bad(name, why):
            raise ValueError(f"{name}: {why} (got {getattr(self, name)!r})")

        if not (isinstance(self.pe, (int, float)) and self.pe > 0 and math.isfinite(self.pe)):
            bad("pe", "must be a positive finite number")
        if isinstance(self.n_d, bool) or not isinstance(self.n_d, int) or self.n_d < 1:
            bad("n_d", "must be an integer >= 1")
        if not (0.0 <= self.p_o < 1.0):
            bad("p_o", "must lie in [0, 1)")
        kinds = self.solver_kinds()
        if kinds is None:
            bad("solvers", f"expected one kind or {self.n_d} kinds from {SOLVER_KINDS}")
        try:
            DbcMode.parse(self.dbc_mode)
        except ValueError:
            bad("dbc_mode", "must be WDBC, MDBC or SDBC")
        if not (0.0 < self.alpha_r <= 1.0):
            bad("alpha_r", "must lie in (0, 1]")
        for name in ("epochs_per_iter", "max_iters", "n_collocation", "snapshot_points"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                bad(name, "must be a positive integer")
        if self.snapshot_points < 3:
            bad("snapshot_points", "must be >= 3")
        for name in ("delta_schwarz", "tol_l2", "mu", "k", "lr", "fom_h"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                bad(name, "must be a positive finite number")
        if self.reference not in ("fom_grid", "analytic"):
            bad("reference", "must be 'fom_grid' or 'analytic'")
        if self.fom_scheme not in ("auto",) + SCHEMES:
            bad("fom_scheme", f"must be 'auto' or one of {SCHEMES}")
        sizes = list(self.layer_sizes)
        if len(sizes) < 2 or sizes[0] != 1 or sizes[-1] != 1 or min(sizes) < 1:
            bad("layer_sizes", "must look like [1, N, ..., 1]")
        if any(int(i) < 1 for i in self.snapshot_iters):
            bad("snapshot_iters", "iterations are numbered from 1")

    def solver_kinds(self):
        kinds = [self.solvers] if isinstance(self.solvers, str) else list(self.solvers)
        kinds = [str(s).lower() for s in kinds]
        if len(kinds) == 1:
            kinds = kinds * self.n_d
        if len(kinds) != self.n_d or any(s not in SOLVER_KINDS for s in kinds):
            return None
        return kinds

    @property
    def spec(self) -> BvpSpec:
        return BvpSpec.from_peclet(self.pe)

    @property
    def decomposition(self):
        return decompose(self.n_d, self.p_o)

    @property
    def scheme(self) -> str:
        return choose_scheme(self.pe, self.fom_h) if self.fom_scheme == "auto" else self.fom_scheme

    def to_dict(self) -> dict:
        d = asdict(self)
        d["layer_sizes"] = list(d["layer_sizes"])
        return d

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def _seed_for(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


class PinnSolver:
    kind = "pinn"

    def __init__(self, pinn: SubdomainPinn, spec: BvpSpec, epochs: int, lr=1e-3, reset_adam=False):
        self.pinn = pinn
        self.spec = spec
        self.epochs = epochs
        self.adam = Adam(lr=lr)
        self.reset_adam = reset_adam
        self.history = []

    @property
    def interval(self):
        return self.pinn.interval

    @property
    def sample_points(self):
        return self.pinn.points

    def solve(self, g_left, g_right):
        self.pinn.g_left = g_left
        self.pinn.g_right = g_right
        if self.reset_adam:
            self.adam.reset()
        self.history = train_epochs(self.pinn, self.spec, self.epochs, self.adam)

    def evaluate(self, x):
        return transform_solution(self.pinn, np.asarray(x, dtype=float))

    def dense(self, n=512):
        x = np.linspace(*self.interval, n)
        return x, self.evaluate(x)


class FomSolver:
    kind = "fom"

    def __init__(self, spec: BvpSpec, interval, n_cells: int, scheme: str):
        self.spec = spec
        self._interval = tuple(interval)
        self.n_cells = n_cells
        self.scheme = scheme
        self.grid: FomGrid | None = None

    @property
    def interval(self):
        return self._interval

    @property
    def sample_points(self):
        a, b = self._interval
        x = a + (b - a) / self.n_cells * np.arange(self.n_cells + 1)
        x[-1] = b
        return x

    def solve(self, g_left, g_right):
        self.grid = solve_fd(self.spec, self._interval, self.n_cells, g_left, g_right, self.scheme)

    def evaluate(self, x):
        if self.grid is None:
            return np.zeros_like(np.asarray(x, dtype=float))
        return interpolate(self.grid, x)

    def dense(self, n=None):
        x = self.sample_points
        return x, self.evaluate(x)


def schwarz_rel_error(prev, curr) -> float:
    """``||curr - prev|| / ||prev||``; infinite when ``prev`` vanishes but ``curr`` does not."""
    prev = np.asarray(prev, dtype=float)
    curr = np.asarray(curr, dtype=float)
    if prev.shape != curr.shape:
        raise ValueError("samples must be taken at the same points")
    num = float(np.linalg.norm(curr - prev))
    den = float(np.linalg.norm(prev))
    if den < 1e-14:
        return math.inf if num > 0 else 0.0
    return num / den


def l2_rel_error(approx, reference) -> float:
    approx = np.asarray(approx, dtype=float)
    reference = np.asarray(reference, dtype=float)
    if approx.shape != reference.shape:
        raise ValueError("approximation and reference must be aligned")
    den = float(np.linalg.norm(reference))
    num = float(np.linalg.norm(approx - reference))
    if den == 0.0:
        return 0.0 if num == 0.0 else math.inf
    return num / den


def check_convergence(schwarz_errs, l2_errs, delta=1e-3, tol_l2=5e-3) -> bool:
    """True iff the worst subdomain passes both tolerances."""
    if len(schwarz_errs) == 0:
        return False
    return max(schwarz_errs) < delta and max(l2_errs) < tol_l2


@dataclass
class IterationRecord:
    """One subdomain solve; ``left_from``/``right_from`` are ``(subdomain, iter)``
    provenance tags of the traces used (``None`` for system boundaries, iter 0
    for the initial zero trace)."""

    iter: int
    subdomain: int
    solver: str
    schwarz_err: float
    l2_err: float
    l2_err_analytic: float
    g_left: float
    g_right: float
    seconds: float
    left_from: tuple | None
    right_from: tuple | None


@dataclass
class SchwarzResult:
    config: SchwarzConfig
    status: Status
    iterations: int
    records: list
    solvers: list
    reference_x: np.ndarray
    reference_u: np.ndarray
    snapshots: dict = field(default_factory=dict)
    message: str = ""

    def per_iter(self, name):
        """``{iter: [value per subdomain]}`` for a record attribute."""
        out = {}
        for r in self.records:
            out.setdefault(r.iter, []).append(getattr(r, name))
        return out

    @property
    def final_schwarz_errors(self):
        return self.per_iter("schwarz_err").get(self.iterations, [])

    @property
    def final_l2_errors(self):
        return self.per_iter("l2_err").get(self.iterations, [])

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED

    def evaluate(self, x):
        """Coupled solution: each point is taken from the subdomain in whose
        interior it lies deepest."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty_like(x)
        depth = np.full(x.shape, -np.inf)
        owner = np.zeros(x.shape, dtype=int)
        for i, s in enumerate(self.solvers):
            a, b = s.interval
            d = np.minimum(x - a, b - x)
            take = d > depth
            depth[take] = d[take]
            owner[take] = i
        for i, s in enumerate(self.solvers):
            sel = owner == i
            if sel.any():
                a, b = s.interval
                out[sel] = s.evaluate(np.clip(x[sel], a, b))
        return out

    def summary(self) -> dict:
        l2 = self.final_l2_errors
        return {
            "config": self.config.to_dict(),
            "status": self.status.value,
            "iterations": self.iterations,
            "final_schwarz_errors": [_json_float(v) for v in self.final_schwarz_errors],
            "final_l2_errors": [_json_float(v) for v in l2],
            "final_l2_mean": _json_float(float(np.mean(l2))) if l2 else None,
            "final_l2_errors_analytic": [
                _json_float(v) for v in self.per_iter("l2_err_analytic").get(self.iterations, [])
            ],
            "message": self.message,
        }

    def write(self, out_dir) -> None:
        """``trace.csv``, ``timing.csv`` and ``summary.json`` into ``out_dir``."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_trace_csv(out / "trace.csv", self.records)
        with open(out / "timing.csv", "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "subdomain", "seconds"])
            for r in self.records:
                w.writerow([r.iter, r.subdomain, f"{r.seconds:.6f}"])
        (out / "summary.json").write_text(json.dumps(self.summary(), indent=2) + "\n")


def _json_float(v):
    return v if math.isfinite(v) else str(v)


def write_trace_csv(path, records) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in records:
            w.writerow([
                r.iter, r.subdomain, r.solver, repr(r.schwarz_err), repr(r.l2_err),
                repr(r.l2_err_analytic), repr(r.g_left), repr(r.g_right),
            ])


def build_solvers(config: SchwarzConfig):
    """Instantiate one solver per subdomain from ``config``."""
    spec = config.spec
    decomp = config.decomposition
    kinds = config.solver_kinds()
    mode = DbcMode.parse(config.dbc_mode)
    need_points = "pinn" in kinds
    colloc = sample_collocation(config.n_collocation, config.collocation_seed, decomp) if need_points else None
    snaps = None
    if need_points and config.use_data_loss:
        _, snaps = make_snapshot(spec, colloc, config.snapshot_points)
    solvers = []
    for i, kind in enumerate(kinds):
        interval = decomp.interval(i)
        if kind == "fom":
            solvers.append(FomSolver(spec, interval, cells_for(interval, config.fom_h), config.scheme))
            continue
        pts = colloc.per_subdomain[i]
        if pts.size == 0:
            raise ValueError(f"subdomain {i} received no collocation points")
        weights = LossWeights.for_mode(mode, config.alpha_r, config.use_data_loss)
        pinn = SubdomainPinn(
            params=init_params(config.layer_sizes, _seed_for(config.seed, i)),
            mode=mode,
            interval=interval,
            points=pts,
            index=i,
            n_subdomains=config.n_d,
            weights=weights,
            k=config.k,
            mu=config.mu,
            snapshot=snaps[i] if snaps else None,
            linear_output=config.linear_output,
            mdbc_literal=config.mdbc_literal,
        )
        solvers.append(PinnSolver(pinn, spec, config.epochs_per_iter, config.lr, config.reset_adam))
    return solvers


def _reference(config: SchwarzConfig):
    spec = config.spec
    ref = reference_solution(spec, config.fom_h)
    x = ref.x
    exact = analytic_solution(spec, x)
    u = exact if config.reference == "analytic" else ref.values
    return x, u, exact


def run(config: SchwarzConfig, out_dir=None, solvers=None, on_iteration=None) -> SchwarzResult:
    """Run the coupled iteration described by ``config``.

    ``solvers`` may be passed to reuse pre-built (e.g. pre-trained) subdomain
    solvers.  ``on_iteration(n, records)`` is called after every sweep.
    """
    config.validate()
    solvers = solvers if solvers is not None else build_solvers(config)
    n = len(solvers)
    ref_x, ref_u, exact = _reference(config)
    masks = [(ref_x >= s.interval[0]) & (ref_x <= s.interval[1]) for s in solvers]
    prev = [np.zeros(np.size(s.sample_points)) for s in solvers]
    # trace[i] = (value of u_i at the left end of i+1, value at the right end of i-1)
    traces = [[0.0, 0.0] for _ in range(n)]
    solved_at = [0] * n
    want = {int(i) for i in config.snapshot_iters}

    records, snapshots = [], {}
    status, message, it = Status.RUNNING, "", 0
    for it in range(1, config.max_iters + 1):
        sweep = []
        try:
            for i, s in enumerate(solvers):
                g_left = traces[i - 1][0] if i > 0 else 0.0
                g_right = traces[i + 1][1] if i < n - 1 else 0.0
                left_from = (i - 1, solved_at[i - 1]) if i > 0 else None
                right_from = (i + 1, solved_at[i + 1]) if i < n - 1 else None
                t0 = time.perf_counter()
                s.solve(g_left, g_right)
                curr = np.asarray(s.evaluate(s.sample_points), dtype=float)
                if not np.all(np.isfinite(curr)):
                    raise NonFiniteError(f"subdomain {i} produced non-finite values")
                if i < n - 1:
                    traces[i][0] = float(s.evaluate(solvers[i + 1].interval[0]))
                if i > 0:
                    traces[i][1] = float(s.evaluate(solvers[i - 1].interval[1]))
                solved_at[i] = it
                seconds = time.perf_counter() - t0
                on_ref = np.asarray(s.evaluate(ref_x[masks[i]]), dtype=float)
                sweep.append(IterationRecord(
                    iter=it,
                    subdomain=i,
                    solver=s.kind,
                    schwarz_err=schwarz_rel_error(prev[i], curr),
                    l2_err=l2_rel_error(on_ref, ref_u[masks[i]]),
                    l2_err_analytic=l2_rel_error(on_ref, exact[masks[i]]),
                    g_left=float(g_left),
                    g_right=float(g_right),
                    seconds=seconds,
                    left_from=left_from,
                    right_from=right_from,
                ))
                prev[i] = curr
        except (NonFiniteError, SingularMatrixError, FloatingPointError) as exc:
            records.extend(sweep)
            status, message = Status.DIVERGED, f"iteration {it}: {exc}"
            break
        records.extend(sweep)
        if it in want:
            snapshots[it] = [s.dense() for s in solvers]
        if on_iteration is not None:
            on_iteration(it, sweep)
        if check_convergence(
            [r.schwarz_err for r in sweep], [r.l2_err for r in sweep],
            config.delta_schwarz, config.tol_l2,
        ):
            status = Status.CONVERGED
            break
    else:
        status = Status.MAX_ITERS
        message = f"no convergence within {config.max_iters} iterations"

    iterations = records[-1].iter if records else 0
    if status is not Status.DIVERGED:
        snapshots.setdefault(iterations, [s.dense() for s in solvers])
    result = SchwarzResult(config, status, iterations, records, solvers, ref_x, ref_u, snapshots, message)
    if out_dir is not None:
        result.write(out_dir)
    return result
