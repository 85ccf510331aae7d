"""Fully connected swish MLP with a flat, documented parameter vector.

Layout of ``theta`` (layer-major, weights before biases)::

    [W0 (fan_in0 x fan_out0, row-major), b0 (fan_out0),
     W1 ..., b1, ...]

A layer maps ``h -> h @ W + b``.  Every layer, including the output layer,
is followed by swish unless ``linear_output`` is set, in which case the last
affine map is returned as is.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import Jet2, check_finite, dense_jet, swish

__all__ = [
    "MlpParams",
    "Activation",
    "init_params",
    "forward",
    "forward_layers",
    "forward_jet_stacked",
    "n_parameters",
    "save_params",
    "load_params",
]

DEFAULT_LAYERS = (1, 20, 20, 1)


@dataclass(frozen=True)
class Activation:
    kind: str = "swish"
    mu: float = 1.0

    def __call__(self, z):
        return swish(z, self.mu)


def _validate_layers(layer_sizes):
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2 or sizes[0] != 1 or sizes[-1] != 1 or min(sizes) < 1:
        raise ValueError(f"layer_sizes must look like [1, N, ..., 1], got {list(layer_sizes)}")
    if any(n != s for n, s in zip(sizes, layer_sizes)):
        raise ValueError("layer sizes must be integers")
    return sizes


def n_parameters(layer_sizes) -> int:
    sizes = _validate_layers(layer_sizes)
    return sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))


@dataclass
class MlpParams:
    layer_sizes: tuple
    theta: np.ndarray
    seed: int | None = None
    _slices: list = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        self.layer_sizes = _validate_layers(self.layer_sizes)
        self.theta = np.asarray(self.theta, dtype=float)
        if self.theta.shape != (n_parameters(self.layer_sizes),):
            raise ValueError(
                f"theta has {self.theta.size} entries, expected {n_parameters(self.layer_sizes)}"
            )
        slices, pos = [], 0
        for a, b in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            slices.append(((pos, pos + a * b), (a, b), (pos + a * b, pos + a * b + b)))
            pos += a * b + b
        self._slices = slices

    @property
    def size(self) -> int:
        return self.theta.size

    def layers(self):
        """``[(W, b), ...]`` as views into ``theta`` (in-place updates propagate)."""
        out = []
        for (w0, w1), shape, (b0, b1) in self._slices:
            out.append((self.theta[w0:w1].reshape(shape), self.theta[b0:b1]))
        return out

    @classmethod
    def from_layers(cls, layers, seed=None) -> "MlpParams":
        sizes = [1] + [np.shape(w)[1] for w, _ in layers]
        theta = np.concatenate([np.concatenate([np.ravel(w), np.ravel(b)]) for w, b in layers])
        return cls(tuple(sizes), theta, seed)

    def copy(self) -> "MlpParams":
        return MlpParams(self.layer_sizes, self.theta.copy(), self.seed)


def init_params(layer_sizes=DEFAULT_LAYERS, seed: int = 0) -> MlpParams:
    """Glorot-uniform weights, zero biases."""
    sizes = _validate_layers(layer_sizes)
    rng = np.random.default_rng(seed)
    parts = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (a + b))
        parts.append(rng.uniform(-limit, limit, size=a * b))
        parts.append(np.zeros(b))
    return MlpParams(sizes, np.concatenate(parts), seed)


def forward_layers(layers, h, mu=1.0, linear_output=False):
    """Run column input ``h`` (shape ``(M, 1)``) through ``layers``.

    ``h`` may be an array or a ``Jet2`` of arrays; ``layers`` entries may be
    arrays or tape variables.  Returns shape ``(M, 1)``.
    """
    last = len(layers) - 1
    for j, (w, b) in enumerate(layers):
        z = h @ w + b
        h = z if (j == last and linear_output) else swish(z, mu)
    return h


def forward_jet_stacked(layers, x, mu=1.0, linear_output=False):
    """Fused equivalent of ``forward_layers(layers, jet2_lift(x))``.

    ``x`` is a 1-D array of points.  Returns a ``Jet2`` whose components are
    1-D (arrays, or tape variables when ``layers`` holds them).
    """
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    h = np.stack([x, np.ones_like(x), np.zeros_like(x)])
    last = len(layers) - 1
    for j, (w, b) in enumerate(layers):
        h = dense_jet(h, w, b, mu, activate=not (j == last and linear_output))
    return Jet2(h[0, :, 0], h[1, :, 0], h[2, :, 0])


def forward(params: MlpParams, x, mu=1.0, linear_output=False):
    """Network output at ``x`` (float, array, or ``Jet2``).

    With a ``Jet2`` input the result is ``(u, u_x, u_xx)`` packed in a Jet2
    of the same shape as ``x.val``.
    """
    layers = params.layers()
    if isinstance(x, Jet2):
        shape = np.shape(x.val)

        n = int(np.prod(shape)) if shape else 1

        def col(c, symbolic=True):
            # exact python zeros in derivative slots stay symbolic
            if symbolic and isinstance(c, (int, float)) and c == 0:
                return 0.0
            return np.broadcast_to(np.asarray(c, float).reshape(-1, 1), (n, 1))

        h = Jet2(col(x.val, False), col(x.d1), col(x.d2))
        out = forward_layers(layers, h, mu, linear_output)
        check_finite(out)

        def back(c):
            if isinstance(c, (int, float)):
                c = np.full((n, 1), float(c))
            c = np.reshape(c, shape)
            return float(c) if not shape else c

        return Jet2(back(out.val), back(out.d1), back(out.d2))
    xa = np.asarray(x, dtype=float)
    out = forward_layers(layers, xa.reshape(-1, 1), mu, linear_output)
    check_finite(out)
    out = out.reshape(xa.shape)
    return float(out) if out.ndim == 0 else out


def save_params(path, params: MlpParams) -> None:
    doc = {
        "layer_sizes": list(params.layer_sizes),
        "seed": params.seed,
        "theta": params.theta.tolist(),
    }
    Path(path).write_text(json.dumps(doc))


def load_params(path) -> MlpParams:
    doc = json.loads(Path(path).read_text())
    return MlpParams(tuple(doc["layer_sizes"]), np.asarray(doc["theta"], float), doc.get("seed"))
