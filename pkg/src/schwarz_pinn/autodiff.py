"""Forward jets in x nested inside a reverse-mode tape over parameters.

``Jet2`` carries a value with its first and second derivative with respect
to the single spatial input.  Its components may be plain floats, numpy
arrays, or ``Var`` nodes recorded on a ``Tape``; in the last case the
spatial derivatives are themselves differentiable with respect to whatever
parameters the tape tracks.  This is how the residual loss, which contains
u_x and u_xx, gets its parameter gradient.

Elementary functions (``exp``, ``tanh``, ``sin``, ``cos``, ``sigmoid``,
``swish``) dispatch on their argument type, so the same model code runs on
floats, arrays, tape variables and jets.
"""
from __future__ import annotations

import numpy as np

from ._kernels import swish_jet_backward, swish_jet_forward

__all__ = [
    "NonFiniteError",
    "Tape",
    "Var",
    "Jet2",
    "jet2_lift",
    "reverse_grad",
    "gradient_check",
    "exp",
    "tanh",
    "sin",
    "cos",
    "sigmoid",
    "swish",
    "swish_derivative",
    "dense_jet",
]


class NonFiniteError(ArithmeticError):
    """A forward pass or loss produced NaN or Inf."""


def _unbroadcast(g, shape):
    g = np.asarray(g)
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _matmul_grad_a(g, b, shape):
    # vector operands behave as a column / row that numpy squeezes away
    if b.ndim == 1:
        return _unbroadcast(np.multiply.outer(g, b), shape)
    return _unbroadcast(g @ np.swapaxes(b, -1, -2), shape)


def _matmul_grad_b(g, a, shape):
    if a.ndim == 1:
        return _unbroadcast(np.multiply.outer(a, g), shape)
    return _unbroadcast(np.swapaxes(a, -1, -2) @ g, shape)


class Tape:
    """Append-only record of array operations for reverse accumulation.

    Nodes are stored in construction order, which is a valid topological
    order.  Each node keeps its parent indices and one vector-Jacobian
    product closure per parent.
    """

    def __init__(self):
        self.values = []
        self.parents = []
        self.vjps = []
        self.params = []
        self.output = None

    def __len__(self):
        return len(self.values)

    def _push(self, value, parents=(), vjps=()):
        self.values.append(value)
        self.parents.append(parents)
        self.vjps.append(vjps)
        self.output = len(self.values) - 1
        return Var(self, self.output, value)

    def constant(self, value):
        return self._push(np.asarray(value, dtype=float))

    def parameter(self, value):
        """Register a differentiable leaf; gradients come back in this order."""
        v = self._push(np.asarray(value, dtype=float))
        self.params.append(v.idx)
        return v

    def backward(self, output=None):
        """Return the adjoint of every node (``None`` where unreached)."""
        out = self.output if output is None else output.idx
        grads = [None] * (out + 1)
        grads[out] = np.ones_like(self.values[out])
        parents, vjps = self.parents, self.vjps
        for i in range(out, -1, -1):
            g = grads[i]
            if g is None or not parents[i]:
                continue
            for p, vjp in zip(parents[i], vjps[i]):
                c = vjp(g)
                grads[p] = c if grads[p] is None else grads[p] + c
        return grads


class Var:
    """Handle to a node on a ``Tape``."""

    __slots__ = ("tape", "idx", "value")
    __array_ufunc__ = None

    def __init__(self, tape, idx, value):
        self.tape = tape
        self.idx = idx
        self.value = value

    def __repr__(self):
        return f"Var(idx={self.idx}, value={self.value!r})"

    @property
    def shape(self):
        return np.shape(self.value)

    def _lift(self, other):
        if isinstance(other, Var):
            return other
        return None

    def __add__(self, other):
        if isinstance(other, Jet2):
            return NotImplemented
        o = self._lift(other)
        a = self.value
        if o is None:
            out = a + other
            sa = np.shape(a)
            if np.shape(out) == sa:
                return self.tape._push(out, (self.idx,), (lambda g: g,))
            return self.tape._push(out, (self.idx,), (lambda g: _unbroadcast(g, sa),))
        b = o.value
        out = a + b
        sa, sb = np.shape(a), np.shape(b)
        return self.tape._push(
            out,
            (self.idx, o.idx),
            (lambda g: _unbroadcast(g, sa), lambda g: _unbroadcast(g, sb)),
        )

    __radd__ = __add__

    def __neg__(self):
        return self.tape._push(-self.value, (self.idx,), (lambda g: -g,))

    def __sub__(self, other):
        if isinstance(other, Jet2):
            return NotImplemented
        o = self._lift(other)
        if o is None:
            return self + (-np.asarray(other))
        a, b = self.value, o.value
        sa, sb = np.shape(a), np.shape(b)
        return self.tape._push(
            a - b,
            (self.idx, o.idx),
            (lambda g: _unbroadcast(g, sa), lambda g: -_unbroadcast(g, sb)),
        )

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet2):
            return NotImplemented
        o = self._lift(other)
        a = self.value
        sa = np.shape(a)
        if o is None:
            c = other
            return self.tape._push(a * c, (self.idx,), (lambda g: _unbroadcast(g * c, sa),))
        b = o.value
        sb = np.shape(b)
        return self.tape._push(
            a * b,
            (self.idx, o.idx),
            (lambda g: _unbroadcast(g * b, sa), lambda g: _unbroadcast(g * a, sb)),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Var):
            return self * reciprocal(other)
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return reciprocal(self) * other

    def __pow__(self, n):
        if n == 2:
            return square(self)
        if not isinstance(n, (int, float)):
            raise TypeError("only constant exponents are supported")
        a = self.value
        return self.tape._push(a**n, (self.idx,), (lambda g: g * n * a ** (n - 1),))

    def __matmul__(self, other):
        a = self.value
        if isinstance(other, Var):
            b = other.value
            return self.tape._push(
                a @ b,
                (self.idx, other.idx),
                (lambda g: _matmul_grad_a(g, b, a.shape), lambda g: _matmul_grad_b(g, a, b.shape)),
            )
        b = np.asarray(other)
        return self.tape._push(a @ b, (self.idx,), (lambda g: _matmul_grad_a(g, b, a.shape),))

    def __rmatmul__(self, other):
        a = np.asarray(other)
        b = self.value
        return self.tape._push(a @ b, (self.idx,), (lambda g: _matmul_grad_b(g, a, b.shape),))

    def __getitem__(self, key):
        a = self.value
        shape = a.shape

        def vjp(g):
            out = np.zeros(shape)
            np.add.at(out, key, g) if _has_fancy(key) else out.__setitem__(key, g)
            return out

        return self.tape._push(a[key], (self.idx,), (vjp,))

    def sum(self):
        shape = np.shape(self.value)
        return self.tape._push(
            np.sum(self.value), (self.idx,), (lambda g: np.broadcast_to(g, shape),)
        )

    def mean(self):
        shape = np.shape(self.value)
        n = max(1, int(np.size(self.value)))
        return self.tape._push(
            np.sum(self.value) / n, (self.idx,), (lambda g: np.broadcast_to(g / n, shape),)
        )


def _has_fancy(key):
    keys = key if isinstance(key, tuple) else (key,)
    return any(isinstance(k, (list, np.ndarray)) for k in keys)


def _unary(x, value, deriv):
    """Record an elementwise unary op with local derivative ``deriv``."""
    return x.tape._push(value, (x.idx,), (lambda g: g * deriv,))


def reciprocal(x):
    if isinstance(x, Var):
        r = 1.0 / x.value
        return _unary(x, r, -r * r)
    return 1.0 / x


def square(x):
    if isinstance(x, Var):
        a = x.value
        return _unary(x, a * a, 2.0 * a)
    if isinstance(x, Jet2):
        return x * x
    return x * x


def exp(x):
    if isinstance(x, Var):
        e = np.exp(x.value)
        return _unary(x, e, e)
    if isinstance(x, Jet2):
        e = exp(x.val)
        return x._chain(e, e, e)
    return np.exp(x)


def tanh(x):
    if isinstance(x, Var):
        t = np.tanh(x.value)
        return _unary(x, t, 1.0 - t * t)
    if isinstance(x, Jet2):
        t = tanh(x.val)
        fp = 1.0 - t * t
        return x._chain(t, fp, -2.0 * t * fp)
    return np.tanh(x)


def sin(x):
    if isinstance(x, Var):
        return _unary(x, np.sin(x.value), np.cos(x.value))
    if isinstance(x, Jet2):
        s = sin(x.val)
        return x._chain(s, cos(x.val), -s)
    return np.sin(x)


def cos(x):
    if isinstance(x, Var):
        return _unary(x, np.cos(x.value), -np.sin(x.value))
    if isinstance(x, Jet2):
        c = cos(x.val)
        return x._chain(c, -sin(x.val), -c)
    return np.cos(x)


def _sigmoid(z):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def sigmoid(x):
    if isinstance(x, Var):
        s = _sigmoid(x.value)
        return _unary(x, s, s * (1.0 - s))
    if isinstance(x, Jet2):
        s = sigmoid(x.val)
        fp = s * (1.0 - s)
        return x._chain(s, fp, fp * (1.0 - 2.0 * s))
    return _sigmoid(np.asarray(x, dtype=float)) if np.ndim(x) else float(_sigmoid(x))


def _swish_d(z, order, mu):
    """``order``-th derivative (0..3) of ``z * sigmoid(mu z)`` on arrays."""
    s = _sigmoid(mu * z)
    if order == 0:
        return z * s
    q = s * (1.0 - s)
    if order == 1:
        return s + mu * z * q
    r = 1.0 - 2.0 * s
    if order == 2:
        return mu * q * (2.0 + mu * z * r)
    if order == 3:
        return mu * mu * q * (3.0 * r + mu * z * (r * r - 2.0 * q))
    raise ValueError("order must be 0..3")


def swish_derivative(z, order=0, mu=1.0):
    """Swish or one of its first two derivatives, on floats, arrays or Vars."""
    if isinstance(z, Var):
        return _unary(z, _swish_d(z.value, order, mu), _swish_d(z.value, order + 1, mu))
    out = _swish_d(np.asarray(z, dtype=float), order, mu)
    return float(out) if out.ndim == 0 else out


def _swish_all(z, mu):
    """Swish and its first three derivatives from one sigmoid evaluation."""
    s = _sigmoid(mu * z)
    q = s * (1.0 - s)
    r = 1.0 - 2.0 * s
    mz = mu * z
    f0 = z * s
    f1 = s + mz * q
    f2 = mu * q * (2.0 + mz * r)
    f3 = mu * mu * q * (3.0 * r + mz * (r * r - 2.0 * q))
    return f0, f1, f2, f3


def swish(z, mu=1.0):
    """``z / (1 + exp(-mu z))``."""
    if isinstance(z, Jet2):
        v = z.val
        if isinstance(v, Var):
            f0, f1, f2, f3 = _swish_all(v.value, mu)
            return z._chain(_unary(v, f0, f1), _unary(v, f1, f2), _unary(v, f2, f3))
        f0, f1, f2, _ = _swish_all(np.asarray(v, dtype=float), mu)
        return z._chain(f0, f1, f2)
    return swish_derivative(z, 0, mu)


def dense_jet(h, w, b, mu=1.0, activate=True):
    """Fused dense layer (plus optional swish) on a stacked jet.

    ``h`` has shape ``(3, M, n_in)`` holding value, first and second spatial
    derivative; the result has shape ``(3, M, n_out)``.  Any of ``h``, ``w``,
    ``b`` may be tape variables, in which case a single node with a
    hand-derived vector-Jacobian product is recorded.
    """
    hv = h.value if isinstance(h, Var) else np.asarray(h, dtype=float)
    wv = w.value if isinstance(w, Var) else np.asarray(w, dtype=float)
    bv = b.value if isinstance(b, Var) else np.asarray(b, dtype=float)
    n_in, n_out = wv.shape
    m = hv.shape[1]
    z = (hv.reshape(-1, n_in) @ wv).reshape(3, m, n_out)
    z[0] += bv
    y = swish_jet_forward(z, mu) if activate else z
    tape = next((v.tape for v in (h, w, b) if isinstance(v, Var)), None)
    if tape is None:
        return y

    cache = [None, None]

    def dz(g):
        if cache[0] is not g:
            cache[0] = g
            cache[1] = swish_jet_backward(z, mu, g) if activate else g
        return cache[1]

    parents, vjps = [], []
    if isinstance(h, Var):
        parents.append(h.idx)
        vjps.append(lambda g: dz(g) @ wv.T)
    if isinstance(w, Var):
        parents.append(w.idx)
        vjps.append(lambda g: hv.reshape(-1, n_in).T @ dz(g).reshape(-1, n_out))
    if isinstance(b, Var):
        parents.append(b.idx)
        vjps.append(lambda g: dz(g)[0].sum(axis=0))
    return tape._push(y, tuple(parents), tuple(vjps))


def _is_zero(c):
    return isinstance(c, (int, float)) and c == 0


def _add(a, b):
    if _is_zero(a):
        return b
    if _is_zero(b):
        return a
    return a + b


def _mul(a, b):
    if _is_zero(a) or _is_zero(b):
        return 0.0
    return a * b


def _matmul(a, w):
    if _is_zero(a):
        return 0.0
    return a @ w


class Jet2:
    """Truncated Taylor triple ``(f, f', f'')`` in the spatial variable.

    A python ``0.0`` in a derivative slot means "identically zero" and lets
    products skip work.
    """

    __slots__ = ("val", "d1", "d2")
    __array_ufunc__ = None

    def __init__(self, val, d1=0.0, d2=0.0):
        self.val = val
        self.d1 = d1
        self.d2 = d2

    def __repr__(self):
        return f"Jet2(val={self.val!r}, d1={self.d1!r}, d2={self.d2!r})"

    def __iter__(self):
        return iter((self.val, self.d1, self.d2))

    def _chain(self, f, fp, fpp):
        d1 = _mul(fp, self.d1)
        d2 = _add(_mul(fpp, _mul(self.d1, self.d1)), _mul(fp, self.d2))
        return Jet2(f, d1, d2)

    def __add__(self, other):
        if isinstance(other, Jet2):
            return Jet2(self.val + other.val, _add(self.d1, other.d1), _add(self.d2, other.d2))
        return Jet2(self.val + other, self.d1, self.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet2(-self.val, _mul(-1.0, self.d1), _mul(-1.0, self.d2))

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet2):
            f, g = self, other
            d1 = _add(_mul(f.d1, g.val), _mul(f.val, g.d1))
            d2 = _add(
                _add(_mul(f.d2, g.val), _mul(2.0, _mul(f.d1, g.d1))), _mul(f.val, g.d2)
            )
            return Jet2(f.val * g.val, d1, d2)
        return Jet2(self.val * other, _mul(self.d1, other), _mul(self.d2, other))

    def __rmul__(self, other):
        return Jet2(other * self.val, _mul(other, self.d1), _mul(other, self.d2))

    def __truediv__(self, other):
        if isinstance(other, Jet2):
            raise TypeError("division by a Jet2 is not supported")
        inv = 1.0 / other if not isinstance(other, Var) else reciprocal(other)
        return self * inv

    def __pow__(self, n):
        if n != 2:
            raise TypeError("only squaring is supported")
        return self * self

    def __matmul__(self, w):
        return Jet2(self.val @ w, _matmul(self.d1, w), _matmul(self.d2, w))

    def __getitem__(self, key):
        def take(c):
            return c if _is_zero(c) else c[key]

        return Jet2(self.val[key], take(self.d1), take(self.d2))


def jet2_lift(x):
    """Jet of the identity map at ``x``: ``(x, 1, 0)``."""
    if isinstance(x, (int, float)):
        return Jet2(float(x), 1.0, 0.0)
    x = np.asarray(x, dtype=float)
    return Jet2(x, np.ones_like(x), 0.0)


def reverse_grad(tape: Tape, n_params: int) -> np.ndarray:
    """Gradient of ``tape.output`` with respect to the registered parameters.

    The parameter leaves are flattened in registration order and concatenated.
    """
    if tape.output is None:
        raise ValueError("empty tape")
    out = tape.values[tape.output]
    if np.size(out) != 1:
        raise ValueError("tape output must be a scalar")
    if not np.all(np.isfinite(out)):
        raise NonFiniteError(f"tape output is not finite: {out!r}")
    grads = tape.backward()
    parts = []
    for idx in tape.params:
        g = grads[idx] if idx < len(grads) else None
        if g is None:
            g = np.zeros_like(tape.values[idx])
        parts.append(np.ravel(g))
    flat = np.concatenate(parts) if parts else np.zeros(0)
    if flat.size != n_params:
        raise ValueError(f"tape tracks {flat.size} parameters, expected {n_params}")
    return flat


def gradient_check(loss, theta, step=1e-4):
    """Compare an analytic gradient with central differences.

    ``loss(theta)`` must return ``(value, gradient)``.  Returns the largest
    ``|analytic - fd| / max(1e-8, |fd|)`` over components.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    theta = np.array(theta, dtype=float)
    _, grad = loss(theta)
    grad = np.asarray(grad, dtype=float)
    worst = 0.0
    for j in range(theta.size):
        tp = theta.copy()
        tm = theta.copy()
        tp[j] += step
        tm[j] -= step
        fd = (float(loss(tp)[0]) - float(loss(tm)[0])) / (2.0 * step)
        err = abs(grad[j] - fd) / max(1e-8, abs(fd))
        worst = max(worst, err)
    return worst


def _isfinite(x):
    if isinstance(x, Var):
        x = x.value
    return bool(np.all(np.isfinite(x)))


def check_finite(*values, what="forward pass"):
    for v in values:
        if isinstance(v, Jet2):
            ok = _isfinite(v.val) and _isfinite(v.d1) and _isfinite(v.d2)
        else:
            ok = _isfinite(v)
        if not ok:
            raise NonFiniteError(f"non-finite value in {what}")

