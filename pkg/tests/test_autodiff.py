import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schwarz_pinn import autodiff as ad
from schwarz_pinn.autodiff import (
    Jet2,
    NonFiniteError,
    Tape,
    dense_jet,
    gradient_check,
    jet2_lift,
    reverse_grad,
)
from schwarz_pinn.network import forward_jet_stacked, forward_layers, init_params

finite = st.floats(-3.0, 3.0, allow_nan=False)


def test_lift():
    assert tuple(jet2_lift(0.5)) == (0.5, 1.0, 0.0)
    assert tuple(jet2_lift(0)) == (0.0, 1.0, 0.0)


def test_square_via_jets():
    x = jet2_lift(3.0)
    assert tuple(x * x) == (9.0, 6.0, 2.0)
    assert tuple(x**2) == (9.0, 6.0, 2.0)


@given(finite, finite, finite, finite, finite, finite)
def test_product_rule(a0, a1, a2, b0, b1, b2):
    f, g = Jet2(a0, a1, a2), Jet2(b0, b1, b2)
    p = f * g
    assert p.val == pytest.approx(a0 * b0)
    assert p.d1 == pytest.approx(a1 * b0 + a0 * b1)
    assert p.d2 == pytest.approx(a2 * b0 + 2 * a1 * b1 + a0 * b2)


def _closed_forms(mu=1.3):
    def sw(z):
        return z / (1 + np.exp(-mu * z))

    def sw1(z):
        s = 1 / (1 + np.exp(-mu * z))
        return s + mu * z * s * (1 - s)

    def sw2(z):
        s = 1 / (1 + np.exp(-mu * z))
        return mu * s * (1 - s) * (2 + mu * z * (1 - 2 * s))

    return {
        "sin": (ad.sin, np.sin, np.cos, lambda z: -np.sin(z)),
        "tanh": (ad.tanh, np.tanh, lambda z: 1 - np.tanh(z) ** 2,
                 lambda z: -2 * np.tanh(z) * (1 - np.tanh(z) ** 2)),
        "exp": (ad.exp, np.exp, np.exp, np.exp),
        "swish": (lambda j: ad.swish(j, mu), sw, sw1, sw2),
    }


@pytest.mark.parametrize("name", ["sin", "tanh", "exp", "swish"])
def test_unary_jets_match_closed_forms(name):
    fn, f0, f1, f2 = _closed_forms()[name]
    z = np.random.default_rng(0).uniform(-3, 3, 100)
    # inner map x -> 2x + 0.5 x^2 at x = z, so chain terms are exercised
    inner = Jet2(z, 1.0 + 0.0 * z, 0.0) * 2.0 + Jet2(z, np.ones_like(z), 0.0) ** 2 * 0.5
    out = fn(inner)
    v, d1, d2 = inner
    assert np.allclose(out.val, f0(v), rtol=1e-10, atol=1e-12)
    assert np.allclose(out.d1, f1(v) * d1, rtol=1e-10, atol=1e-12)
    assert np.allclose(out.d2, f2(v) * d1**2 + f1(v) * d2, rtol=1e-10, atol=1e-12)


def test_swish_values():
    assert ad.swish(0.0) == 0.0
    assert ad.swish(1.0) == pytest.approx(0.731059, abs=1e-6)
    v = ad.swish(-50.0)
    assert np.isfinite(v) and v == pytest.approx(-9.6437e-21, rel=1e-4)


def test_reverse_simple():
    t = Tape()
    th = t.parameter(np.array([3.0]))
    t.output = (th * th).sum().idx
    assert reverse_grad(t, 1).tolist() == [6.0]

    t = Tape()
    a, b = t.parameter(np.array(2.0)), t.parameter(np.array(5.0))
    t.output = (a * b).idx
    assert reverse_grad(t, 2).tolist() == [5.0, 2.0]


def test_reverse_rejects_nonfinite():
    t = Tape()
    th = t.parameter(np.array([np.inf]))
    t.output = (th * 1.0).sum().idx
    with pytest.raises(NonFiniteError):
        reverse_grad(t, 1)


def _mlp_loss(sizes, x, seed=0, fused=False):
    p = init_params(sizes, seed)

    def loss(theta):
        p.theta[:] = theta
        t = Tape()
        layers = [(t.parameter(w), t.parameter(b)) for w, b in p.layers()]
        if fused:
            j = forward_jet_stacked(layers, x)
            out = j.val
        else:
            out = forward_layers(layers, x.reshape(-1, 1))[:, 0]
        total = (out * out).mean()
        t.output = total.idx
        return total.value, reverse_grad(t, p.size)

    return loss, p.theta.copy()


def test_mlp_gradient_matches_fd():
    x = np.random.default_rng(1).uniform(0, 1, 8)
    loss, theta = _mlp_loss((1, 20, 20, 1), x)
    assert gradient_check(loss, theta, 1e-4) < 1e-4


def test_gradient_check_quadratic_and_constant():
    a = np.array([1.0, -2.0, 0.5])

    def quad(th):
        return float(np.sum(a * th**2)), 2 * a * th

    assert gradient_check(quad, np.array([0.3, -1.2, 2.0]), 1e-5) < 1e-8
    assert gradient_check(lambda th: (4.0, np.zeros_like(th)), np.ones(3)) == 0.0
    with pytest.raises(ValueError):
        gradient_check(quad, np.ones(3), 0.0)


def test_nesting_contract_uxx_weight_derivative():
    # d(u_xx)/dw for one hidden weight, against finite differences of u_xx
    p = init_params((1, 6, 1), 3)
    x = np.array([0.2, 0.7])
    j = 2  # a hidden-layer weight

    def uxx(theta):
        q = p.copy()
        q.theta[:] = theta
        col = x.reshape(-1, 1)
        out = forward_layers(q.layers(), Jet2(col, np.ones_like(col), 0.0))
        return out.d2[:, 0]

    t = Tape()
    layers = [(t.parameter(w), t.parameter(b)) for w, b in p.layers()]
    col = x.reshape(-1, 1)
    out = forward_layers(layers, Jet2(col, np.ones_like(col), 0.0))
    t.output = out.d2.sum().idx
    g = reverse_grad(t, p.size)
    eps = 1e-6
    tp, tm = p.theta.copy(), p.theta.copy()
    tp[j] += eps
    tm[j] -= eps
    fd = (uxx(tp).sum() - uxx(tm).sum()) / (2 * eps)
    assert g[j] == pytest.approx(fd, rel=1e-6)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.5, 2.0), st.booleans())
def test_fused_layer_matches_generic(seed, mu, activate):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=(3, 7, 4))
    w, b = rng.normal(size=(4, 5)), rng.normal(size=5)
    g = rng.normal(size=(3, 7, 5))

    def run(fused):
        t = Tape()
        wv, bv, hv = t.parameter(w), t.parameter(b), t.parameter(h)
        if fused:
            y = dense_jet(hv, wv, bv, mu, activate)
            out = (y * g).sum()
            val = y.value
        else:
            z = Jet2(hv[0], hv[1], hv[2]) @ wv + bv
            y = ad.swish(z, mu) if activate else z
            out = (y.val * g[0]).sum() + (y.d1 * g[1]).sum() + (y.d2 * g[2]).sum()
            val = np.stack([y.val.value, y.d1.value, y.d2.value])
        t.output = out.idx
        return val, reverse_grad(t, w.size + b.size + h.size)

    v1, g1 = run(True)
    v2, g2 = run(False)
    assert np.allclose(v1, v2, rtol=1e-12, atol=1e-12)
    assert np.allclose(g1, g2, rtol=1e-10, atol=1e-12)


def test_dense_jet_without_tape_returns_array():
    h = np.zeros((3, 2, 1))
    y = dense_jet(h, np.ones((1, 3)), np.zeros(3))
    assert isinstance(y, np.ndarray) and y.shape == (3, 2, 3)


def test_var_ops_broadcast_and_index():
    t = Tape()
    a = t.parameter(np.array([[1.0, 2.0], [3.0, 4.0]]))
    b = t.parameter(np.array([10.0, 20.0]))
    out = ((a + b) * a - a / 2.0 + 1.0 / (a + 1.0))[:, 1].sum() + (a @ b).mean()
    t.output = out.idx
    g = reverse_grad(t, 6)

    def f(th):
        A, B = th[:4].reshape(2, 2), th[4:]
        return (((A + B) * A - A / 2 + 1 / (A + 1))[:, 1].sum() + (A @ B).mean())

    th = np.concatenate([a.value.ravel(), b.value])
    eps = 1e-6
    fd = [(f(th + eps * e) - f(th - eps * e)) / (2 * eps) for e in np.eye(6)]
    assert np.allclose(g, fd, rtol=1e-6)


def test_check_finite():
    ad.check_finite(Jet2(1.0, 2.0, 3.0), np.ones(3))
    with pytest.raises(NonFiniteError):
        ad.check_finite(Jet2(1.0, np.nan, 0.0))


def test_batched_matmul_reduces_weight_gradient():
    rng = np.random.default_rng(5)
    h, w = rng.normal(size=(3, 4, 2)), rng.normal(size=(2, 3))
    t = Tape()
    wv = t.parameter(w)
    t.output = (h @ wv).sum().idx
    g = reverse_grad(t, w.size).reshape(w.shape)
    assert np.allclose(g, h.sum(axis=(0, 1))[:, None] * np.ones((1, 3)))
