"""Model boundary-value problem, overlapping decomposition and collocation.

The problem is the steady 1D advection-diffusion equation

    -nu * u'' + u' - 1 = 0   on (0, 1),   u(0) = u(1) = 0,

with nu = 1 / Pe.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "BvpSpec",
    "Decomposition",
    "CollocationSet",
    "analytic_solution",
    "analytic_derivatives",
    "strong_residual",
    "decompose",
    "van_der_corput",
    "sample_collocation",
]


@dataclass(frozen=True)
class BvpSpec:
    """Advection-diffusion problem with unit source and homogeneous ends."""

    nu: float
    source: float = 1.0
    bc_left: float = 0.0
    bc_right: float = 0.0

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ValueError(f"nu must be positive and finite, got {self.nu!r}")
        if self.source != 1.0 or self.bc_left != 0.0 or self.bc_right != 0.0:
            raise ValueError("only source=1 with u(0)=u(1)=0 is supported")

    @classmethod
    def from_peclet(cls, pe: float) -> "BvpSpec":
        if not pe > 0:
            raise ValueError(f"Peclet number must be positive, got {pe!r}")
        return cls(nu=1.0 / pe)

    @property
    def peclet(self) -> float:
        return 1.0 / self.nu


def _check_unit_interval(x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        raise ValueError("x must lie in [0, 1]")
    return x


def analytic_solution(spec: BvpSpec, x):
    """Closed-form solution, evaluated without overflow for any Pe.

    Uses ``u = x - (exp((x-1)/nu) - exp(-1/nu)) / (1 - exp(-1/nu))``, which is
    algebraically identical to the textbook form but only ever exponentiates
    non-positive numbers.
    """
    x = _check_unit_interval(x)
    nu = spec.nu
    denom = -math.expm1(-1.0 / nu)
    u = x - (np.exp((x - 1.0) / nu) - math.exp(-1.0 / nu)) / denom
    return float(u) if u.ndim == 0 else u


def analytic_derivatives(spec: BvpSpec, x):
    """Return ``(u, u_x, u_xx)`` of the closed-form solution."""
    x = _check_unit_interval(x)
    nu = spec.nu
    denom = -math.expm1(-1.0 / nu)
    layer = np.exp((x - 1.0) / nu)
    u = x - (layer - math.exp(-1.0 / nu)) / denom
    u_x = 1.0 - layer / (nu * denom)
    u_xx = -layer / (nu * nu * denom)
    return u, u_x, u_xx


def strong_residual(u, u_x, u_xx, spec: BvpSpec):
    """Pointwise residual ``-nu*u_xx + u_x - 1``."""
    return -spec.nu * u_xx + u_x - spec.source


@dataclass(frozen=True)
class Decomposition:
    """Equal-width overlapping subdomains ``(gammas[2i], gammas[2i+1])``."""

    n_d: int
    p_o: float
    s_d: float
    s_o: float
    gammas: tuple

    @property
    def intervals(self) -> list[tuple[float, float]]:
        g = self.gammas
        return [(g[2 * i], g[2 * i + 1]) for i in range(self.n_d)]

    def interval(self, i: int) -> tuple[float, float]:
        return self.gammas[2 * i], self.gammas[2 * i + 1]


def decompose(n_d: int, p_o: float) -> Decomposition:
    """Split (0, 1) into ``n_d`` subdomains overlapping by fraction ``p_o``.

    Each subdomain has width ``s_d = 1 / (n_d (1 - p_o) + p_o)`` and neighbours
    share ``s_o = p_o * s_d``; subdomain ``i`` (0-based) starts at
    ``i * (s_d - s_o)``.
    """
    if isinstance(n_d, bool) or int(n_d) != n_d or n_d < 1:
        raise ValueError(f"n_d must be an integer >= 1, got {n_d!r}")
    n_d = int(n_d)
    if n_d == 1:
        return Decomposition(1, 0.0, 1.0, 0.0, (0.0, 1.0))
    if not (0.0 <= p_o < 1.0):
        raise ValueError(f"p_o must lie in [0, 1), got {p_o!r}")
    s_d = 1.0 / (n_d * (1.0 - p_o) + p_o)
    s_o = p_o * s_d
    gammas = []
    for i in range(n_d):
        left = i * (s_d - s_o)
        gammas += [left, left + s_d]
    if abs(gammas[-1] - 1.0) > 1e-12:
        raise ArithmeticError(f"decomposition does not end at 1 (got {gammas[-1]!r})")
    gammas[-1] = 1.0
    return Decomposition(n_d, float(p_o), s_d, s_o, tuple(gammas))


def van_der_corput(n: int, seed: int = 0, start: int = 1) -> np.ndarray:
    """Base-2 radical inverse of ``start, start+1, ...`` (``n`` values).

    A nonzero ``seed`` applies a random digital shift (XOR of the 52 binary
    digits with a seeded mask), which keeps the low-discrepancy structure.
    """
    bits = 52
    idx = np.arange(start, start + n, dtype=np.uint64)
    rev = np.zeros(n, dtype=np.uint64)
    for _ in range(bits):
        rev = (rev << np.uint64(1)) | (idx & np.uint64(1))
        idx = idx >> np.uint64(1)
    if seed:
        mask = np.random.default_rng(seed).integers(0, 2**bits, dtype=np.uint64)
        rev = rev ^ np.uint64(mask)
    return rev.astype(np.float64) / float(2**bits)


@dataclass(frozen=True)
class CollocationSet:
    global_points: np.ndarray
    per_subdomain: list = field(default_factory=list)

    def __len__(self):
        return len(self.global_points)


def sample_collocation(m: int, seed: int, decomp: Decomposition) -> CollocationSet:
    """Draw ``m`` quasi-random points in (0, 1) and assign them to subdomains.

    Points in an overlap are shared by every subdomain whose closed interval
    contains them.
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m!r}")
    pts = van_der_corput(m, seed)
    start = m + 1
    # a digital shift can map one index onto exactly 0; draw replacements
    while np.any(pts <= 0.0) or np.any(pts >= 1.0):
        pts = pts[(pts > 0.0) & (pts < 1.0)]
        extra = van_der_corput(m - len(pts), seed, start=start)
        start += m - len(pts)
        pts = np.concatenate([pts, extra])
    per = [pts[(pts >= a) & (pts <= b)] for a, b in decomp.intervals]
    return CollocationSet(pts, per)
