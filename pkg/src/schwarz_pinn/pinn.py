"""Subdomain PINN: boundary-condition transforms, composite loss, training.

Three ways of imposing Dirichlet data are supported:

* ``WDBC`` -- the network output is the solution; every boundary value is
  matched through the boundary loss.
* ``MDBC`` -- the network output is multiplied by a factor that vanishes at
  the system boundaries (x = 0, x = 1) the subdomain touches; Schwarz
  boundaries are matched weakly.
* ``SDBC`` -- ``u = v * NN + phi * g_left + psi * g_right`` with ``v`` vanishing
  at both subdomain ends, so all Dirichlet data holds by construction (up to
  the ``10**(-10 * width)`` tails of ``phi`` and ``psi``).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .autodiff import Jet2, NonFiniteError, Tape, exp, reverse_grad, tanh
from .network import MlpParams, forward, forward_jet_stacked, forward_layers
from .optim import Adam
from .problem import BvpSpec

__all__ = [
    "DbcMode",
    "LossWeights",
    "Snapshot",
    "SubdomainPinn",
    "LossBreakdown",
    "scaling_v",
    "ramp_phi",
    "ramp_psi",
    "mdbc_factor",
    "transform_solution",
    "residual_loss",
    "boundary_loss",
    "data_loss",
    "total_loss",
    "loss_and_grad",
    "train_epochs",
    "write_loss_history",
]

_LN10 = math.log(10.0)


class DbcMode(str, Enum):
    WDBC = "WDBC"
    MDBC = "MDBC"
    SDBC = "SDBC"

    @classmethod
    def parse(cls, value) -> "DbcMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown DBC mode {value!r}; expected WDBC, MDBC or SDBC") from None


@dataclass(frozen=True)
class LossWeights:
    alpha_r: float
    alpha_b: float
    alpha_d: float

    @classmethod
    def for_mode(cls, mode, alpha_r=0.25, use_data=False) -> "LossWeights":
        """``alpha_b = 1 - alpha_r`` unless SDBC; ``alpha_d = 1 - alpha_r`` with data."""
        mode = DbcMode.parse(mode)
        if not (0.0 < alpha_r <= 1.0):
            raise ValueError(f"alpha_r must lie in (0, 1], got {alpha_r!r}")
        alpha_b = 0.0 if mode is DbcMode.SDBC else 1.0 - alpha_r
        alpha_d = 1.0 - alpha_r if use_data else 0.0
        return cls(alpha_r, alpha_b, alpha_d)


@dataclass(frozen=True)
class Snapshot:
    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.shape(self.points) != np.shape(self.values):
            raise ValueError("snapshot points and values must have equal length")


def scaling_v(x, interval, k=1.0):
    """``tanh(k (b - x)) * tanh(k (x - a))``; zero at both ends."""
    a, b = interval
    return tanh(k * (b - x)) * tanh(k * (x - a))


def ramp_phi(x, interval):
    """``10**(-10 (x - a))``: one at the left end, decaying to the right."""
    return exp(-10.0 * _LN10 * (x - interval[0]))


def ramp_psi(x, interval):
    """``10**(10 (x - b))``: one at the right end, decaying to the left."""
    return exp(10.0 * _LN10 * (x - interval[1]))


def mdbc_factor(x, interval, left_system, right_system, k=1.0, literal=False):
    """Multiplier for MDBC; ``None`` means identity.

    It vanishes only at system boundaries and is normalised to one at the
    opposite (Schwarz) end, so the raw network value there equals the
    transformed solution.  ``literal=True`` always uses the two-sided ``v``.
    """
    a, b = interval
    if literal or (left_system and right_system):
        return scaling_v(x, interval, k)
    scale = 1.0 / math.tanh(k * (b - a))
    if left_system:
        return tanh(k * (x - a)) * scale
    if right_system:
        return tanh(k * (b - x)) * scale
    return None


@dataclass
class SubdomainPinn:
    """One subdomain network together with its current Dirichlet data."""

    params: MlpParams
    mode: DbcMode
    interval: tuple
    points: np.ndarray
    index: int = 0
    n_subdomains: int = 1
    weights: LossWeights | None = None
    k: float = 1.0
    mu: float = 1.0
    g_left: float = 0.0
    g_right: float = 0.0
    snapshot: Snapshot | None = None
    linear_output: bool = False
    mdbc_literal: bool = False

    def __post_init__(self):
        self.mode = DbcMode.parse(self.mode)
        a, b = self.interval
        if not a < b:
            raise ValueError(f"empty interval {self.interval!r}")
        if not self.k > 0:
            raise ValueError("k must be positive")
        self.interval = (float(a), float(b))
        self.points = np.asarray(self.points, dtype=float)
        if self.points.size < 1:
            raise ValueError("a subdomain PINN needs at least one collocation point")
        if self.weights is None:
            self.weights = LossWeights.for_mode(self.mode, 0.25, self.snapshot is not None)

    @property
    def left_is_system(self) -> bool:
        return self.index == 0

    @property
    def right_is_system(self) -> bool:
        return self.index == self.n_subdomains - 1

    def factors(self, x):
        """``(F, C)`` with ``u = F * NN + C``; either may be ``None``."""
        if self.mode is DbcMode.WDBC:
            return None, None
        if self.mode is DbcMode.MDBC:
            f = mdbc_factor(
                x, self.interval, self.left_is_system, self.right_is_system, self.k,
                self.mdbc_literal,
            )
            return f, None
        v = scaling_v(x, self.interval, self.k)
        c = ramp_phi(x, self.interval) * self.g_left + ramp_psi(x, self.interval) * self.g_right
        return v, c

    def __call__(self, x):
        return transform_solution(self, x)


def _apply(f, c, nn):
    u = nn if f is None else f * nn
    return u if c is None else u + c


def transform_solution(pinn: SubdomainPinn, x):
    """Evaluate the transformed solution at ``x`` (float, array or Jet2)."""
    nn = forward(pinn.params, x, pinn.mu, pinn.linear_output)
    f, c = pinn.factors(x)
    return _apply(f, c, nn)


@dataclass(frozen=True)
class LossBreakdown:
    total: float
    r: float
    b: float
    d: float


class _LossContext:
    """Constant (parameter-free) pieces of the loss for fixed Dirichlet data."""

    def __init__(self, pinn: SubdomainPinn, spec: BvpSpec):
        w = pinn.weights
        if w.alpha_d > 0 and pinn.snapshot is None:
            raise ValueError("data loss requested but the subdomain has no snapshot")
        pts = pinn.points
        m = pts.size
        a, b = pinn.interval
        xs = np.concatenate([pts, [a, b]])
        self.m = m
        self.nu = spec.nu
        self.source = spec.source
        self.xs = xs
        self.f, self.c = pinn.factors(Jet2(xs, np.ones_like(xs), 0.0))
        self.res_w = np.concatenate([np.full(m, 1.0 / m), [0.0, 0.0]])
        if pinn.mode is DbcMode.WDBC:
            mask = [1.0, 1.0]
        elif pinn.mode is DbcMode.MDBC:
            mask = [0.0 if pinn.left_is_system else 1.0, 0.0 if pinn.right_is_system else 1.0]
        else:
            mask = [0.0, 0.0]
        self.b_mask = np.array(mask)
        gl = 0.0 if pinn.left_is_system else pinn.g_left
        gr = 0.0 if pinn.right_is_system else pinn.g_right
        self.b_target = np.array([gl, gr])
        self.use_b = w.alpha_b > 0 and self.b_mask.any()
        self.use_d = pinn.snapshot is not None
        if self.use_d:
            snap = pinn.snapshot
            if snap.points.shape != pts.shape or not np.array_equal(snap.points, pts):
                raise ValueError("snapshot must be sampled at the collocation points")
            self.d_w = self.res_w
            self.d_target = np.concatenate([snap.values, [0.0, 0.0]])
        self.weights = w

    def network(self, layers, mu, linear_output, fused=True):
        if fused:
            return forward_jet_stacked(layers, self.xs, mu, linear_output)
        col = self.xs.reshape(-1, 1)
        nn = forward_layers(layers, Jet2(col, np.ones_like(col), 0.0), mu, linear_output)
        return nn[:, 0]

    def terms(self, layers, mu, linear_output, fused=True):
        nn = self.network(layers, mu, linear_output, fused)
        u = _apply(self.f, self.c, nn)
        r = u.d1 - self.source if _is_zero(u.d2) else u.d2 * (-self.nu) + u.d1 - self.source
        l_r = (r * r * self.res_w).sum()
        l_b = 0.0
        if self.use_b:
            nb = nn.val[self.m:]
            diff = nb - self.b_target
            l_b = (diff * diff * self.b_mask).sum()
        l_d = 0.0
        if self.use_d:
            diff = u.val - self.d_target
            l_d = (diff * diff * self.d_w).sum()
        w = self.weights
        total = l_r * w.alpha_r
        if self.use_b:
            total = total + l_b * w.alpha_b
        if w.alpha_d > 0:
            total = total + l_d * w.alpha_d
        return total, l_r, l_b, l_d


def _is_zero(c):
    return isinstance(c, (int, float)) and c == 0


def _value(v):
    return float(getattr(v, "value", v))


def _breakdown(terms):
    vals = [_value(t) for t in terms]
    if not all(math.isfinite(v) for v in vals):
        raise NonFiniteError(f"non-finite loss components {vals}")
    return LossBreakdown(*vals)


def _evaluate(pinn, spec):
    ctx = _LossContext(pinn, spec)
    return _breakdown(ctx.terms(pinn.params.layers(), pinn.mu, pinn.linear_output))


def residual_loss(pinn: SubdomainPinn, spec: BvpSpec) -> float:
    """Mean squared strong residual over the subdomain collocation points."""
    return _evaluate(pinn, spec).r


def boundary_loss(pinn: SubdomainPinn, neighbors=None) -> float:
    """Weak Dirichlet penalty on the raw network output at the subdomain ends.

    ``neighbors`` optionally overrides ``(g_left, g_right)``; absent
    neighbours are represented by 0, which is also the system value.
    """
    if pinn.mode is DbcMode.SDBC:
        return 0.0
    gl, gr = (pinn.g_left, pinn.g_right) if neighbors is None else neighbors
    a, b = pinn.interval
    nn = forward(pinn.params, np.array([a, b]), pinn.mu, pinn.linear_output)
    left = 0.0 if pinn.left_is_system else gl
    right = 0.0 if pinn.right_is_system else gr
    total = 0.0
    if pinn.mode is DbcMode.WDBC or not pinn.left_is_system:
        total += (nn[0] - left) ** 2
    if pinn.mode is DbcMode.WDBC or not pinn.right_is_system:
        total += (nn[1] - right) ** 2
    return float(total)


def data_loss(pinn: SubdomainPinn) -> float:
    if pinn.snapshot is None:
        if pinn.weights.alpha_d > 0:
            raise ValueError("data loss requested but the subdomain has no snapshot")
        return 0.0
    u = transform_solution(pinn, pinn.snapshot.points)
    return float(np.mean((u - pinn.snapshot.values) ** 2))


def total_loss(pinn: SubdomainPinn, spec: BvpSpec) -> LossBreakdown:
    """Weighted composite loss with its components."""
    return _evaluate(pinn, spec)


def loss_and_grad(pinn: SubdomainPinn, spec: BvpSpec, ctx=None, fused=True):
    """Composite loss and its gradient with respect to the flat ``theta``.

    ``fused=False`` routes the network through generic Jet2 arithmetic
    instead of the fused layer kernel; both must agree.
    """
    ctx = ctx or _LossContext(pinn, spec)
    tape = Tape()
    layers = [(tape.parameter(w), tape.parameter(b)) for w, b in pinn.params.layers()]
    terms = ctx.terms(layers, pinn.mu, pinn.linear_output, fused)
    tape.output = terms[0].idx
    breakdown = _breakdown(terms)
    grad = reverse_grad(tape, pinn.params.size)
    return breakdown, grad


def train_epochs(pinn: SubdomainPinn, spec: BvpSpec, n_epochs: int, adam: Adam | None = None):
    """Run ``n_epochs`` full-batch Adam steps in place; return per-epoch losses.

    The recorded loss of each epoch is the one evaluated before its update.
    """
    if n_epochs < 1:
        raise ValueError("n_epochs must be >= 1")
    adam = adam if adam is not None else Adam()
    ctx = _LossContext(pinn, spec)
    theta = pinn.params.theta
    history = []
    for epoch in range(n_epochs):
        breakdown, grad = loss_and_grad(pinn, spec, ctx)
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f"non-finite gradient at epoch {epoch}")
        adam.step(theta, grad)
        history.append(breakdown)
    return history


def write_loss_history(path, rows, append=False):
    """Write ``(schwarz_iter, epoch, LossBreakdown)`` rows as CSV."""
    mode = "a" if append else "w"
    with open(path, mode, newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        if not append or fh.tell() == 0:
            writer.writerow(["schwarz_iter", "epoch", "loss_total", "loss_r", "loss_b", "loss_d"])
        for it, epoch, lb in rows:
            writer.writerow([it, epoch, repr(lb.total), repr(lb.r), repr(lb.b), repr(lb.d)])
