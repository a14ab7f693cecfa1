import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from obukhov import (AmplificationBudgetExceeded, Form, IntegratorConfig, LadderParams,
                     NonFiniteState, ShellState, StepSizeCollapse, build_ladder, figure2_params,
                     galerkin_rhs, integrate, integrate_backward_galerkin, roundtrip)
from obukhov.model import l2_kernel

# K = 1 inviscid Figure-2 ladder at t = -T, frozen from mpmath's Taylor ODE solver
# (agrees with x_0 = -sqrt(C) tanh(sqrt(C)(t+s)), x_1 = sqrt(C/delta_0) sech(sqrt(C)(t+s)),
# C = A_0^2 + delta_0 A_1^2) to 20 digits.
K1_AT_MINUS_T = [2.8824097918761355868, 2.7578862963921370414]


def decay(rate):
    return lambda t, x: -rate * x


def test_linear_decay_accuracy():
    rate, rtol = 7.0, 1e-10
    traj = integrate(decay(rate), ShellState(0.0, "l2", [1.0]), 1.0, IntegratorConfig(rel_tol=rtol))
    exact = math.exp(-rate)
    assert abs(traj.x[-1, 0] - exact) <= 10 * rtol * exact
    assert traj.t[-1] == 1.0


def test_observed_order_is_five():
    rate = 3.0
    errors, steps = [], [0.2, 0.1, 0.05, 0.025]
    for h in steps:
        cfg = IntegratorConfig(rel_tol=1e6, abs_tol=1e6, first_step=h, max_step=h)
        traj = integrate(decay(rate), ShellState(0.0, "l2", [1.0]), 1.0, cfg)
        assert traj.stats.accepted == round(1 / h)
        errors.append(abs(traj.x[-1, 0] - math.exp(-rate)))
    slope = np.polyfit(np.log(steps), np.log(errors), 1)[0]
    assert abs(slope - 5) <= 0.5


def test_riccati_collapses_near_one():
    with pytest.raises(StepSizeCollapse) as info:
        integrate(lambda t, x: x * x, ShellState(0.0, "l2", [1.0]), 2.0)
    assert info.value.t == pytest.approx(1.0, abs=1e-6)
    traj = integrate(lambda t, x: x * x, ShellState(0.0, "l2", [1.0]), 2.0, on_collapse="return")
    assert traj.status == "collapsed" and traj.meta["collapse_t"] < 1.0


def test_nonfinite_initial_state():
    with pytest.raises(NonFiniteState):
        integrate(decay(1.0), ShellState(0.0, "l2", [np.nan]), 1.0)


def test_equal_end_time_rejected():
    with pytest.raises(ValueError):
        integrate(decay(1.0), ShellState(0.5, "l2", [1.0]), 0.5)


def test_k0_inviscid_is_stationary():
    L = build_ladder(figure2_params(K=0, nu=0.0))
    traj = integrate_backward_galerkin(L, mode="inviscid")
    assert np.all(traj.x[:, 0] == L.A[0])
    assert roundtrip(L, mode="inviscid").terminal_error[0] == 0.0


def test_k1_inviscid_matches_exact_solution():
    L = build_ladder(figure2_params(K=1, nu=0.0))
    rtol = 1e-10
    traj = integrate_backward_galerkin(L, mode="inviscid", config=IntegratorConfig(rel_tol=rtol))
    np.testing.assert_allclose(traj.x[-1], K1_AT_MINUS_T, rtol=10 * rtol)
    # dense output along the way against the closed form
    d0 = L.delta[0]
    C = L.A[0] ** 2 + d0 * L.A[1] ** 2
    s = -math.atanh(L.A[0] / math.sqrt(C)) / math.sqrt(C)
    t = np.linspace(-L.T, 0, 50)
    x0 = -math.sqrt(C) * np.tanh(math.sqrt(C) * (t + s))
    x1 = math.sqrt(C / d0) / np.cosh(math.sqrt(C) * (t + s))
    np.testing.assert_allclose(traj.interpolate(t), np.column_stack([x0, x1]), rtol=1e-8)


def test_backward_run_structure(fig2_ladder, fig2_backward):
    L, traj = fig2_ladder, fig2_backward
    assert traj.t[0] == 0.0 and traj.t[-1] == -L.T
    assert np.array_equal(traj.x[0], L.A)
    assert np.all(np.diff(traj.t) < 0)
    assert np.all(np.isfinite(traj.x))
    for t in L.event_times():
        assert t in set(traj.t.tolist())
    assert traj.direction == -1.0


def test_uniform_truncated_bound_at_minus_T(fig2_ladder, fig2_backward):
    L = fig2_ladder
    x = fig2_backward.x[-1]
    k = np.arange(3, L.size)
    assert np.all(x[k] <= 2 * L.A[k] * np.exp(0.5 * L.A[k - 1] * L.t_act[k]))


def test_dense_output_reproduces_nodes_and_is_accurate():
    traj = integrate(decay(2.0), ShellState(0.0, "l2", [1.0]), 3.0, IntegratorConfig(rel_tol=1e-12))
    np.testing.assert_array_equal(traj.interpolate(traj.node_t), traj.node_x)
    t = np.linspace(0, 3, 301)
    np.testing.assert_allclose(traj.interpolate(t)[:, 0], np.exp(-2 * t), rtol=1e-6)
    with pytest.raises(ValueError):
        traj.interpolate([3.5])


def test_dense_output_grid_includes_events():
    cfg = IntegratorConfig(dense_output=(0.0, 0.5, 1.0), event_times=(0.25,))
    traj = integrate(decay(1.0), ShellState(0.0, "l2", [1.0]), 1.0, cfg)
    assert traj.t.tolist() == [0.0, 0.25, 0.5, 1.0]


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, 6, elements=st.floats(-1.0, 1.0)))
def test_backward_forward_involution_inviscid(x0):
    L = build_ladder(LadderParams(nu=0.0, alpha=1.0, N0=1.5, b=1.15, beta=1.0, K=5))
    kern = l2_kernel(L)
    zero = np.zeros(L.size)
    rhs = lambda t, X: kern(X, zero)
    cfg = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-14)
    back = integrate(rhs, ShellState(0.0, "l2", x0), -0.5, cfg)
    fwd = integrate(rhs, back.final(), 0.0, cfg)
    scale = max(np.max(np.abs(x0)), 1e-3)
    assert np.max(np.abs(fwd.x[-1] - x0)) <= 100 * 1e-10 * scale
    e = 0.5 * np.sum(back.x ** 2, axis=1)
    assert np.max(np.abs(e - e[0])) <= 1e-8 * max(e[0], 1e-12)


def test_integrating_factor_agrees_with_explicit():
    L = build_ladder(figure2_params(K=8))
    a = integrate_backward_galerkin(L, config=IntegratorConfig(rel_tol=1e-11))
    b = integrate_backward_galerkin(L, config=IntegratorConfig(method="integrating-factor", rel_tol=1e-11))
    assert b.t[-1] == -L.T
    np.testing.assert_allclose(b.x[-1], a.x[-1], rtol=1e-7)


def test_compensated_mode_agrees():
    L = build_ladder(figure2_params(K=8))
    a = integrate_backward_galerkin(L, config=IntegratorConfig(rel_tol=1e-11))
    b = integrate_backward_galerkin(L, config=IntegratorConfig(rel_tol=1e-11, compensated=True))
    np.testing.assert_allclose(b.x[-1], a.x[-1], rtol=1e-8)


def test_roundtrip_error_shrinks_with_tolerance():
    L = build_ladder(figure2_params(K=6))
    errors = [roundtrip(L, IntegratorConfig(rel_tol=r)).terminal_error.max() for r in (1e-6, 1e-8, 1e-10)]
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] <= 1e-3


def test_amplification_budget_guard():
    L = build_ladder(LadderParams(nu=1.0, alpha=2.5, N0=1e3, b=1.2, beta=2.45, c=0.1, K=6))
    with pytest.raises(AmplificationBudgetExceeded) as info:
        integrate_backward_galerkin(L)
    assert info.value.amplification > info.value.budget
    # inviscid runs have nothing to amplify
    integrate_backward_galerkin(L, mode="inviscid")


def test_clamped_run_is_marked(strict_ladder, strict_envelope):
    traj = integrate_backward_galerkin(strict_ladder, mode="inviscid", clamp=strict_envelope)
    assert traj.meta["clamped"] is True
    assert np.all(traj.x <= strict_envelope.zeta(traj.t))


def test_galerkin_rhs_modes():
    L = build_ladder(figure2_params(K=4))
    x = L.A.copy()
    visc = galerkin_rhs(L, "viscous")(-L.T, x)
    masked = galerkin_rhs(L, "viscous-masked")(-L.T, x)
    inv = galerkin_rhs(L, "inviscid")(-L.T, x)
    # at -T only mode 0 is damped under the mask
    np.testing.assert_array_equal(masked[1:], inv[1:])
    assert masked[0] == visc[0] != inv[0]
    with pytest.raises(ValueError):
        galerkin_rhs(L, "sideways")


def test_config_validation_and_roundtrip():
    cfg = IntegratorConfig(rel_tol=1e-9, event_times=(0.1, 0.2))
    assert IntegratorConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ValueError):
        IntegratorConfig(method="euler")
    with pytest.raises(ValueError):
        IntegratorConfig(event_times=(0.2, 0.1))
    with pytest.raises(TypeError):
        IntegratorConfig.from_dict({"tolerance": 1})


def test_trajectory_form_is_kept():
    traj = integrate(decay(1.0), ShellState(0.0, "linf", [1.0]), 1.0)
    assert traj.form is Form.LINF and traj.final().form is Form.LINF
