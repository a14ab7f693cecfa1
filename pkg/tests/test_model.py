from types import SimpleNamespace

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from obukhov import (DimensionMismatch, ForcingSpec, Form, FormMismatch, LadderParams, ModelVariant,
                     ShellState, build_ladder, convert, cutoff_vector, figure2_params,
                     recorded_force, rho, rhs_l2, rhs_linf, rhs_rescaled, rhs_variant)
from obukhov.model import evaluate_cutoff, l2_kernel, rescaled_kernel, rho_integral

L8 = build_ladder(figure2_params(K=8))
values = st.floats(-10.0, 10.0, allow_nan=False)
vectors = arrays(np.float64, L8.size, elements=values)


def test_linf_direct_substitution():
    L = build_ladder(LadderParams(nu=0.0, alpha=2.0, N0=2.0, b=2.0, beta=1.0, K=1))
    np.testing.assert_array_equal(L.N, [2.0, 4.0])
    dY = rhs_linf(ShellState(0.0, "linf", [1.0, 1.0]), L)
    np.testing.assert_allclose(dY, [-0.5, 2.0], rtol=1e-15)


def test_kp_direct_substitution():
    dX = rhs_variant(np.array([1.0, 1.0]), ModelVariant("katz-pavlovic", 2.0), nu=0.0, alpha=1.0)
    np.testing.assert_array_equal(dX, [-1.0, 1.0])
    # the -lam^(alpha k) X_k X_{k+1} term at k = 0 has coefficient lam^0 = 1


def test_kp_three_modes():
    X = np.array([1.0, 2.0, 3.0])
    dX = rhs_variant(X, ModelVariant("katz-pavlovic", 2.0), nu=0.0, alpha=1.0)
    np.testing.assert_array_equal(dX, [-1 * 1 * 2, 1 * 1 - 2 * 2 * 3, 2 * 2 ** 2])


@pytest.mark.parametrize("rhs, form", [(rhs_l2, "l2"), (rhs_linf, "linf"), (rhs_rescaled, "rescaled")])
def test_zero_state_has_zero_derivative(rhs, form):
    out = rhs(ShellState(0.0, form, np.zeros(L8.size)), L8)
    assert np.all(out == 0.0)
    assert np.all(rhs_variant(np.zeros(5), ModelVariant("katz-pavlovic", 2.0), 1.0, 1.0) == 0.0)


def test_geometric_variant_is_obukhov_on_lam_powers():
    lam, alpha, nu = 2.0, 1.5, 0.3
    fake = SimpleNamespace(N=lam ** np.arange(6), params=SimpleNamespace(nu=nu, alpha=alpha))
    X = np.linspace(-1, 1, 6)
    f = np.linspace(0, 1, 6)
    np.testing.assert_allclose(rhs_variant(X, ModelVariant("geometric-obukhov", lam), nu, alpha, f),
                               l2_kernel(fake)(X, f), rtol=1e-15)


def test_super_exp_variant_matches_l2_rhs():
    X = np.linspace(0.1, 1.0, L8.size)
    np.testing.assert_allclose(
        rhs_variant(X, ModelVariant("super-exp-obukhov"), L8.params.nu, L8.params.alpha, ladder=L8),
        rhs_l2(ShellState(0.0, "l2", X), L8), rtol=1e-15)


def test_dimension_and_form_errors():
    with pytest.raises(DimensionMismatch):
        rhs_l2(ShellState(0.0, "l2", np.zeros(3)), L8)
    with pytest.raises(FormMismatch):
        rhs_l2(ShellState(0.0, "linf", np.zeros(L8.size)), L8)
    with pytest.raises(DimensionMismatch):
        rhs_l2(ShellState(0.0, "l2", np.zeros(L8.size)), L8, force=np.zeros(2))
    with pytest.raises(ValueError):
        ModelVariant("katz-pavlovic", 1.0)


@settings(max_examples=80, deadline=None)
@given(vectors, vectors)
def test_l2_and_linf_are_conjugate(X, f):
    a = L8.params.alpha
    s = L8.N ** (a - 1)
    dX = rhs_l2(ShellState(0.0, "l2", X), L8, f)
    dY = rhs_linf(ShellState(0.0, "linf", s * X), L8, s * f)
    scale = np.max(np.abs(s * dX)) + np.max(np.abs(s * X)) + 1e-300
    assert np.max(np.abs(dY - s * dX)) <= 1e-12 * scale


@settings(max_examples=80, deadline=None)
@given(vectors)
def test_rescaled_is_conjugate_to_unforced_viscous_l2(X):
    a = L8.params.alpha
    x = L8.N ** a * X
    dx = rhs_rescaled(ShellState(0.0, "rescaled", x), L8, np.ones(L8.size))
    dX = rhs_l2(ShellState(0.0, "l2", X), L8)
    scale = np.max(np.abs(L8.N ** a * dX)) + 1e-300
    assert np.max(np.abs(dx - L8.N ** a * dX)) <= 1e-12 * scale


@settings(max_examples=80, deadline=None)
@given(vectors)
def test_convert_round_trip(X):
    s = ShellState(0.0, "l2", X)
    back = convert(convert(convert(s, "linf", L8), "rescaled", L8), "l2", L8)
    np.testing.assert_allclose(back.x, X, rtol=1e-14, atol=0)


@settings(max_examples=80, deadline=None)
@given(arrays(np.float64, L8.size, elements=st.floats(-1e3, 1e3, allow_nan=False)))
def test_quadratic_terms_are_energy_neutral(x):
    nonlinear = rescaled_kernel(L8)(x, np.zeros(L8.size))
    terms = L8.N ** (-2 * L8.params.alpha) * x * nonlinear
    assert abs(terms.sum()) <= 1e-13 * (np.max(np.abs(terms)) + 1e-300)


def test_terminal_profile_conversions():
    L = build_ladder(figure2_params(K=12))
    Y = ShellState(0.0, "linf", L.N ** 1.4)
    np.testing.assert_allclose(convert(Y, "l2", L).x, L.N ** -0.1, rtol=1e-14)
    np.testing.assert_allclose(convert(Y, "rescaled", L).x, L.A, rtol=1e-14)
    same = convert(Y, "linf", L)
    assert same.x is not Y.x and np.array_equal(same.x, Y.x)


def test_rho_shape():
    assert rho(0.0) == 1.0 and rho(0.5) == 1.0 and rho(1.0) == 0.0 and rho(3.0) == 0.0
    u = np.linspace(0.5, 1.0, 1000)
    r = rho(u)
    assert np.all(np.diff(r) <= 0)
    inner = r[(r > 0) & (r < 1)]
    assert inner.size > 900 and np.all(np.diff(inner) < 0)
    assert rho(0.75) == pytest.approx(0.5, abs=1e-15)


def test_rho_integral_against_quadrature():
    q = lambda v: mpmath.exp(-1 / v) if v > 0 else mpmath.mpf(0)
    exact = mpmath.quad(lambda v: 1 if v <= 0.5 else q(2 - 2 * v) / (q(2 - 2 * v) + q(2 * v - 1)),
                        [0, 0.5, 0.8])
    assert rho_integral(0.8) == pytest.approx(float(exact), rel=1e-13)
    assert rho_integral(1.0) == pytest.approx(0.75, rel=1e-14)
    assert rho_integral(5.0) == pytest.approx(0.75, rel=1e-14)


def test_evaluate_cutoff_examples():
    spec = ForcingSpec.from_ladder(L8)
    t3 = L8.t_act[3]
    assert evaluate_cutoff(spec, 3, 0.0) == 1.0
    assert evaluate_cutoff(spec, 3, t3) == 0.0
    assert 0.0 < evaluate_cutoff(spec, 3, 0.75 * t3) < 1.0
    ts = np.linspace(t3, t3 / 2, 1000)
    vals = evaluate_cutoff(spec, 3, ts)
    assert np.all(np.diff(vals) >= 0)
    assert np.all(evaluate_cutoff(spec, 3, np.linspace(t3 / 2, 0, 50)) == 1.0)
    assert evaluate_cutoff(spec, 0, -L8.T) == 1.0


def test_cutoff_vector_agrees_with_scalar_evaluation():
    spec = ForcingSpec.from_ladder(L8)
    for t in np.linspace(-L8.T, 0, 37):
        vec = cutoff_vector(spec, t)
        assert [evaluate_cutoff(spec, k, t) for k in range(L8.size)] == list(vec)


def test_recorded_force_support(fig2_ladder, fig2_backward):
    rec = recorded_force(fig2_backward, fig2_ladder)
    assert np.all(rec.g[:, 0] == 0.0)
    assert np.all(rec.g[rec.t == 0.0] == 0.0)
    assert np.all(rec.support_violations() == 0)
    for k in range(1, fig2_ladder.size):
        assert np.all(rec.f[rec.t >= fig2_ladder.t_act[k] / 2, k] == 0.0)
    assert np.any(rec.f[:, 5] != 0.0)


def test_recorded_force_needs_rescaled_form(fig2_ladder, fig2_backward):
    wrong = fig2_backward.resampled(fig2_backward.t[:3])
    wrong.form = Form.L2
    with pytest.raises(FormMismatch):
        recorded_force(wrong, fig2_ladder)
