"""Finite-difference full-order model (FOM) for the advection-diffusion BVP.

Two discretisations of the advection term are offered:

``central``
    ``(u[j+1] - u[j-1]) / 2h``; tridiagonal, second order, oscillatory once the
    cell Peclet number ``h * Pe`` exceeds 2.
``upwind2``
    ``(3 u[j] - 4 u[j-1] + u[j-2]) / 2h``; lower bandwidth 2, second order and
    monotone for advection-dominated flow.  The first interior node has no
    ``u[j-2]`` and falls back to ``(u[j] - u[j-1]) / h``.

Diffusion is always the standard three-point stencil.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .pinn import Snapshot
from .problem import BvpSpec

__all__ = [
    "SCHEMES",
    "DEFAULT_H",
    "FomGrid",
    "SingularMatrixError",
    "thomas_solve",
    "banded_solve",
    "solve_fd",
    "choose_scheme",
    "cells_for",
    "interpolate",
    "reference_solution",
    "make_snapshot",
    "write_solution_csv",
    "read_solution_csv",
]

SCHEMES = ("central", "upwind2")
DEFAULT_H = 1.0 / 1024
_SLACK = 1e-12


class SingularMatrixError(ArithmeticError):
    """A zero pivot was met during elimination."""


@dataclass(frozen=True)
class FomGrid:
    interval: tuple
    n_cells: int
    scheme: str
    values: np.ndarray

    @property
    def h(self) -> float:
        a, b = self.interval
        return (b - a) / self.n_cells

    @property
    def x(self) -> np.ndarray:
        a, b = self.interval
        x = a + self.h * np.arange(self.n_cells + 1)
        x[-1] = b
        return x

    def __call__(self, x):
        return interpolate(self, x)


def thomas_solve(lower, diag, upper, rhs) -> np.ndarray:
    """Solve a tridiagonal system.

    ``lower`` and ``upper`` are the sub- and super-diagonals (length n-1);
    no pivoting is done, so a zero pivot raises ``SingularMatrixError``.
    """
    d = np.array(diag, dtype=float)
    r = np.array(rhs, dtype=float)
    lo = np.asarray(lower, dtype=float)
    up = np.asarray(upper, dtype=float)
    n = d.size
    if r.shape != (n,) or lo.shape != (max(n - 1, 0),) or up.shape != lo.shape:
        raise ValueError("inconsistent tridiagonal shapes")
    c = np.empty(max(n - 1, 0))
    for i in range(n):
        if i > 0:
            d[i] -= lo[i - 1] * c[i - 1]
            r[i] -= lo[i - 1] * r[i - 1]
        if d[i] == 0.0:
            raise SingularMatrixError(f"zero pivot in row {i}")
        if i < n - 1:
            c[i] = up[i] / d[i]
        r[i] /= d[i]
    for i in range(n - 2, -1, -1):
        r[i] -= c[i] * r[i + 1]
    return r


def banded_solve(ab, n_lower: int, n_upper: int, rhs) -> np.ndarray:
    """Gaussian elimination without pivoting on a banded matrix.

    ``ab`` uses the LAPACK band layout (the one ``scipy.linalg.solve_banded``
    takes): ``ab[n_upper + i - j, j] == A[i, j]``.
    """
    ab = np.array(ab, dtype=float)
    x = np.array(rhs, dtype=float)
    n = x.size
    if ab.shape != (n_lower + n_upper + 1, n):
        raise ValueError("band matrix shape does not match rhs")
    u = n_upper
    for k in range(n):
        piv = ab[u, k]
        if piv == 0.0:
            raise SingularMatrixError(f"zero pivot in row {k}")
        for i in range(k + 1, min(k + n_lower + 1, n)):
            f = ab[u + i - k, k] / piv
            if f == 0.0:
                continue
            for j in range(k + 1, min(k + n_upper + 1, n)):
                ab[u + i - j, j] -= f * ab[u + k - j, j]
            x[i] -= f * x[k]
    for k in range(n - 1, -1, -1):
        s = x[k]
        for j in range(k + 1, min(k + n_upper + 1, n)):
            s -= ab[u + k - j, j] * x[j]
        x[k] = s / ab[u, k]
    return x


def choose_scheme(pe: float, h: float = DEFAULT_H) -> str:
    """``upwind2`` when the cell Peclet number exceeds 2, else ``central``."""
    return "upwind2" if h * pe > 2.0 else "central"


def cells_for(interval, h: float = DEFAULT_H) -> int:
    """Smallest cell count whose spacing does not exceed ``h``."""
    a, b = interval
    return max(2, math.ceil((b - a) / h - 1e-9))


def _check_scheme(scheme):
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def solve_fd(spec: BvpSpec, interval=(0.0, 1.0), n_cells: int = 1024, bc_left=0.0,
             bc_right=0.0, scheme: str = "central") -> FomGrid:
    """Solve ``-nu u'' + u' = source`` on ``interval`` with Dirichlet ends."""
    _check_scheme(scheme)
    if int(n_cells) != n_cells or n_cells < 2:
        raise ValueError(f"n_cells must be an integer >= 2, got {n_cells!r}")
    n_cells = int(n_cells)
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise ValueError(f"empty interval {interval!r}")
    if not (math.isfinite(bc_left) and math.isfinite(bc_right)):
        raise ValueError("boundary values must be finite")
    h = (b - a) / n_cells
    nu = spec.nu
    m = n_cells - 1
    diff = nu / (h * h)
    rhs = np.full(m, float(spec.source))

    if scheme == "central":
        lower = np.full(m - 1, -diff - 0.5 / h)
        diag = np.full(m, 2.0 * diff)
        upper = np.full(m - 1, -diff + 0.5 / h)
        rhs[0] += (diff + 0.5 / h) * bc_left
        rhs[-1] += (diff - 0.5 / h) * bc_right
        inner = thomas_solve(lower, diag, upper, rhs)
    else:
        # band rows: super, diag, sub1, sub2
        ab = np.zeros((4, m))
        ab[0, 1:] = -diff
        ab[1, :] = 2.0 * diff + 1.5 / h
        ab[2, :-1] = -diff - 2.0 / h
        ab[3, :-2] = 0.5 / h
        # first interior node: first-order upwind
        ab[1, 0] = 2.0 * diff + 1.0 / h
        rhs[0] += (diff + 1.0 / h) * bc_left
        if m > 1:
            rhs[1] -= 0.5 / h * bc_left
        rhs[-1] += diff * bc_right
        inner = banded_solve(ab, 2, 1, rhs)

    values = np.concatenate([[bc_left], inner, [bc_right]])
    if not np.all(np.isfinite(values)):
        raise SingularMatrixError("finite-difference solve produced non-finite values")
    return FomGrid((a, b), n_cells, scheme, values)


def interpolate(grid: FomGrid, x):
    """Piecewise-linear interpolation of ``grid`` at ``x`` (scalar or array)."""
    a, b = grid.interval
    xa = np.asarray(x, dtype=float)
    if np.any(xa < a - _SLACK) or np.any(xa > b + _SLACK):
        raise ValueError(f"points outside the grid interval [{a}, {b}]")
    out = np.interp(np.clip(xa, a, b), grid.x, grid.values)
    return float(out) if out.ndim == 0 else out


def reference_solution(spec: BvpSpec, h: float = DEFAULT_H, scheme: str | None = None) -> FomGrid:
    """Single-domain FOM on (0, 1); the scheme follows ``choose_scheme`` by default."""
    scheme = scheme or choose_scheme(spec.peclet, h)
    return solve_fd(spec, (0.0, 1.0), cells_for((0.0, 1.0), h), 0.0, 0.0, scheme)


def make_snapshot(spec: BvpSpec, collocation, n_points: int = 1024):
    """Per-subdomain snapshot data from a global ``upwind2`` solve.

    ``n_points`` evenly spaced nodes (``n_points - 1`` cells) cover (0, 1);
    the solution is interpolated onto each subdomain's collocation points.
    Returns ``(grid, [Snapshot, ...])``.
    """
    if n_points < 3:
        raise ValueError("n_points must be >= 3")
    grid = solve_fd(spec, (0.0, 1.0), n_points - 1, 0.0, 0.0, "upwind2")
    snaps = [Snapshot(pts, interpolate(grid, pts)) for pts in collocation.per_subdomain]
    return grid, snaps


def write_solution_csv(path, x, u) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "u"])
        for xi, ui in zip(np.ravel(x), np.ravel(u)):
            w.writerow([repr(float(xi)), repr(float(ui))])


def read_solution_csv(path):
    """Inverse of ``write_solution_csv``; returns ``(x, u)`` arrays."""
    with open(Path(path), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"x", "u"} <= set(reader.fieldnames):
            raise ValueError(f"{path}: expected header with columns x,u")
        rows = [(float(r["x"]), float(r["u"])) for r in reader]
    arr = np.array(rows, dtype=float).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]
