import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schwarz_pinn.problem import (
    BvpSpec,
    analytic_derivatives,
    analytic_solution,
    decompose,
    sample_collocation,
    strong_residual,
    van_der_corput,
)

# frozen from a 50-digit mpmath evaluation of x - (e^{x/nu} - 1)/(e^{1/nu} - 1)
U_PE10_HALF = 0.493307149075715


def test_spec_from_peclet():
    spec = BvpSpec.from_peclet(150)
    assert spec.peclet * spec.nu == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        BvpSpec(nu=0.0)
    with pytest.raises(ValueError):
        BvpSpec(nu=0.1, bc_left=1.0)


def test_analytic_examples():
    assert analytic_solution(BvpSpec.from_peclet(10), 0.0) == 0.0
    assert analytic_solution(BvpSpec.from_peclet(10), 1.0) == pytest.approx(0.0, abs=1e-15)
    assert analytic_solution(BvpSpec.from_peclet(10), 0.5) == pytest.approx(U_PE10_HALF, abs=1e-6)
    assert analytic_solution(BvpSpec.from_peclet(1e6), 0.5) == pytest.approx(0.5, abs=1e-12)


def test_analytic_matches_fine_grid_fd():
    from schwarz_pinn.fom import solve_fd

    spec = BvpSpec.from_peclet(10)
    g = solve_fd(spec, (0, 1), 8192, scheme="central")
    assert g.values[4096] == pytest.approx(U_PE10_HALF, abs=1e-6)


def test_analytic_finite_for_huge_peclet():
    x = np.linspace(0, 1, 1001)
    u = analytic_solution(BvpSpec.from_peclet(1e9), x)
    assert np.all(np.isfinite(u))
    assert u[-1] == 0.0


def test_analytic_domain_error():
    with pytest.raises(ValueError):
        analytic_solution(BvpSpec.from_peclet(10), 1.5)
    with pytest.raises(ValueError):
        analytic_solution(BvpSpec.from_peclet(10), -1e-3)


def test_strong_residual_examples():
    spec = BvpSpec.from_peclet(10)
    assert strong_residual(0.0, 0.0, 0.0, spec) == -1.0
    assert strong_residual(0.3, 1.0, 0.0, spec) == 0.0
    u, ux, uxx = analytic_derivatives(spec, 0.3)
    assert abs(strong_residual(u, ux, uxx, spec)) < 1e-10


@pytest.mark.parametrize("pe", [10, 100, 1e4, 1e6])
def test_residual_vanishes_on_closed_form(pe):
    spec = BvpSpec.from_peclet(pe)
    x = np.random.default_rng(1).uniform(0, 1, 100)
    u, ux, uxx = analytic_derivatives(spec, x)
    res = strong_residual(u, ux, uxx, spec)
    # relative to the size of the individual terms in the layer
    scale = 1.0 + np.abs(ux) + spec.nu * np.abs(uxx)
    assert np.max(np.abs(res) / scale) < 1e-8


@pytest.mark.parametrize("pe", [100, 1e3, 1e4])
def test_boundary_layer_localised(pe):
    spec = BvpSpec.from_peclet(pe)
    x = np.linspace(0, 1, 200001)
    u = analytic_solution(spec, x)
    k = int(np.argmax(u))
    assert 1 - 10 / pe < x[k] < 1
    assert np.all(np.diff(u[: k + 1]) >= 0)


def test_boundary_layer_peak_at_high_peclet():
    # the peak sits at 1 - nu*ln(Pe*D), i.e. about ln(Pe)/Pe from the end;
    # that leaves the 10/Pe band once ln(Pe) > 10
    pe = 1e6
    spec = BvpSpec.from_peclet(pe)
    x_star = 1 + spec.nu * np.log(spec.nu * -np.expm1(-pe))
    x = x_star + np.linspace(-1e-6, 1e-6, 2001)
    u = analytic_solution(spec, x)
    assert abs(x[np.argmax(u)] - x_star) < 2e-9
    assert not (1 - 10 / pe < x_star)


def test_decompose_examples():
    d = decompose(1, 0.3)
    assert d.intervals == [(0.0, 1.0)] and d.s_d == 1.0

    d = decompose(2, 0.1)
    assert d.s_d == pytest.approx(0.526316, abs=1e-6)
    assert d.s_o == pytest.approx(0.052632, abs=1e-6)
    assert d.interval(0) == pytest.approx((0.0, 0.526316), abs=1e-6)
    assert d.interval(1) == pytest.approx((0.473684, 1.0), abs=1e-6)

    d = decompose(3, 0.2)
    assert d.s_d == pytest.approx(0.384615, abs=1e-6)
    expected = [0, 0.384615, 0.307692, 0.692308, 0.615385, 1]
    assert list(d.gammas) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("n_d, p_o", [(0, 0.1), (2, -0.1), (2, 1.0), (2.5, 0.1)])
def test_decompose_rejects(n_d, p_o):
    with pytest.raises(ValueError):
        decompose(n_d, p_o)


@given(st.integers(1, 12), st.one_of(st.just(0.0), st.floats(1e-6, 0.95)))
def test_decompose_invariants(n_d, p_o):
    d = decompose(n_d, p_o)
    g = d.gammas
    assert len(g) == 2 * n_d
    assert g[0] == 0.0 and g[-1] == 1.0
    for a, b in d.intervals:
        assert a < b
        assert b - a == pytest.approx(d.s_d, abs=1e-12)
    if n_d >= 2:
        # the unsnapped formula already lands on 1
        assert (n_d - 1) * (d.s_d - d.s_o) + d.s_d == pytest.approx(1.0, abs=1e-12)
        if p_o > 0:
            for i in range(1, n_d):
                assert g[2 * i] < g[2 * i - 1]


def test_van_der_corput_order():
    assert van_der_corput(4).tolist() == [0.5, 0.25, 0.75, 0.125]


def test_collocation_examples():
    single = decompose(1, 0.0)
    c = sample_collocation(1, 0, single)
    assert len(c) == 1 and 0 < c.global_points[0] < 1
    c = sample_collocation(4, 0, single)
    assert c.global_points.tolist() == [0.5, 0.25, 0.75, 0.125]

    d = decompose(2, 0.1)
    c = sample_collocation(1024, 0, d)
    a, b = d.interval(1)[0], d.interval(0)[1]
    in_overlap = np.sum((c.global_points >= a) & (c.global_points <= b))
    assert sum(len(p) for p in c.per_subdomain) == 1024 + in_overlap


@settings(max_examples=40, deadline=None)
@given(st.integers(256, 2048), st.integers(0, 5), st.integers(1, 6), st.floats(0.0, 0.6))
def test_collocation_coverage(m, seed, n_d, p_o):
    d = decompose(n_d, p_o)
    c = sample_collocation(m, seed, d)
    pts = c.global_points
    assert len(pts) == m and np.all((pts > 0) & (pts < 1))
    seen = np.zeros(m, dtype=bool)
    for (a, b), sub in zip(d.intervals, c.per_subdomain):
        assert len(sub) >= math.floor(m * d.s_d) - 2
        member = (pts >= a) & (pts <= b)
        assert np.array_equal(np.sort(sub), np.sort(pts[member]))
        seen |= member
    assert seen.all()


def test_scrambled_points_are_deterministic_and_distinct():
    a = van_der_corput(64, seed=3)
    b = van_der_corput(64, seed=3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, van_der_corput(64))
    assert len(np.unique(a)) == 64
