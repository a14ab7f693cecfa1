import numpy as np
import pytest

from obukhov import (LadderParams, SpanMismatch, ValidationMode, build_barriers, build_ladder,
                     galerkin_rhs, monitor_membership, verify_lemma_bounds)
from obukhov.barriers import boundary_slack, lemma_grid


def test_terminal_values(strict_ladder, strict_envelope):
    L, env = strict_ladder, strict_envelope
    np.testing.assert_array_equal(env.zeta(0.0), L.A)
    np.testing.assert_array_equal(env.eta(0.0), L.A)
    assert np.all(env.integral(0.0) == 0.0)


def test_zeta_frozen_before_activation(strict_ladder, strict_envelope):
    L, env = strict_ladder, strict_envelope
    traj = env.trajectory
    for k in range(3, L.size):
        before = traj.x[traj.t <= L.t_act[k], k]
        assert before.size >= 2 and np.all(before == before[0])


def test_eta_nondecreasing_in_time(strict_ladder, strict_envelope):
    ts = lemma_grid(strict_ladder)
    eta = strict_envelope.eta(ts)
    assert np.all(np.diff(eta, axis=0) >= 0)


def test_zeta_K_closed_form(strict_ladder, strict_envelope):
    L = strict_ladder
    K = L.K
    ts = lemma_grid(L)
    ref = L.A[K] * np.exp(0.5 * L.A[K - 1] * np.maximum(ts, L.t_act[K]))
    assert np.max(np.abs(strict_envelope.zeta(ts)[:, K] / ref - 1)) <= 1e-8


def test_strict_lemma_bounds(strict_envelope):
    report = verify_lemma_bounds(strict_envelope, grid=512)
    assert report.passed
    assert set(report.checks) == {"z_bound", "z0_bound", "eta_quarter_bound", "eta_global_bound"}
    for check in report.checks.values():
        assert check.worst_margin >= -report.tolerance
    assert report.grid_size >= 512
    assert report.to_dict()["passed"] is True


def test_boundary_inequalities_have_slack(strict_envelope):
    slack = boundary_slack(strict_envelope)
    assert slack["inviscid"] >= 0 and slack["viscous"] >= 0


def test_grid_too_small(strict_envelope):
    with pytest.raises(ValueError):
        verify_lemma_bounds(strict_envelope, grid=50)


def test_report_flags_where_a_bound_fails():
    # In range for strict-viscous, but N0 = 1e3 is far too small for b = 1.15:
    # the zeta system runs away and the bounds fail.
    p = LadderParams(nu=1.0, alpha=2.5, N0=1e3, b=1.15, beta=2.4, c=0.1, K=6)
    env = build_barriers(build_ladder(p, ValidationMode.STRICT_VISCOUS))
    report = verify_lemma_bounds(env)
    assert not report.passed
    bad = [c for c in report.checks.values() if not c.passed]
    for c in bad:
        assert c.violations and {"k", "t", "margin"} <= set(c.violations[0])
        assert c.worst_k is not None and c.worst_t is not None


@pytest.mark.parametrize("mode", ["inviscid", "viscous-masked"])
def test_strict_runs_stay_trapped(strict_ladder, strict_envelope, strict_runs, mode):
    traj = strict_runs[mode]
    log = monitor_membership(traj, strict_envelope, rhs=galerkin_rhs(strict_ladder, mode))
    assert not log.escaped
    assert np.all(log.normalized_worst(strict_ladder.A) >= -1e-8)
    assert np.all(log.margins[0] == 0.0)
    assert log.boundary_checks > 0 and not log.boundary_violations
    assert traj.excursions is log


def test_perturbed_trajectory_escapes_at_first_snapshot(strict_envelope, strict_runs):
    traj = strict_runs["inviscid"].resampled(strict_runs["inviscid"].t)
    traj.x = 3 * traj.x
    log = monitor_membership(traj, strict_envelope)
    assert log.escaped and log.escape_time == traj.t[0]


def test_figure2_runs_report_their_escape(fig2_ladder, fig2_backward):
    env = build_barriers(fig2_ladder)
    log = monitor_membership(fig2_backward, env)
    # small N0: the trapping argument does not apply and the report says where it breaks
    assert log.escaped
    assert -fig2_ladder.T <= log.escape_time < 0 and 0 <= log.escape_mode <= fig2_ladder.K
    assert log.summary(fig2_ladder.A)["escaped"] is True


def test_span_and_size_mismatch(strict_envelope, fig2_backward):
    with pytest.raises(SpanMismatch):
        monitor_membership(fig2_backward, strict_envelope)
