"""Trapping region for the backward Galerkin solutions, and its verification.

Upper barriers ``zeta_k`` solve their own backward ODE from ``zeta_k(0) = A_k``:
frozen on ``[-T, t_k)``, and ``zeta_k' = A_{k-1} zeta_k / 2 - delta_k zeta_{k+1}^2``
on ``[t_k, 0]``; ``zeta_0' = -nu N_0^2 zeta_0 - delta_0 zeta_1^2``.  Lower barriers
are ``eta_0 = A_0`` and ``eta_k = A_k exp(-I_k)`` with ``I_k(t) = int_t^0 zeta_{k-1}``.
``I_k`` rides along in the same integration as an augmented state.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import SpanMismatch
from .integrator import IntegratorConfig, Trajectory, galerkin_rhs, integrate
from .model import Form, ForcingSpec, ShellState, cutoff_vector

__all__ = [
    "BarrierEnvelope",
    "BoundCheck",
    "BoundReport",
    "MembershipLog",
    "build_barriers",
    "verify_lemma_bounds",
    "monitor_membership",
    "lemma_grid",
]


def _zeta_rhs(ladder):
    p = ladder.params
    K = p.K
    A = ladder.A
    rate = np.zeros(K + 1)
    rate[1:] = 0.5 * A[:-1]
    rate[0] = -p.nu * ladder.N[0] ** 2
    dpad = ladder.delta_padded()[:-1]
    t_on = np.asarray(ladder.t_act[1:])  # sorted; mode k >= 1 is active once t >= t_k

    def rhs(t, y):
        z = y[: K + 1]
        out = np.empty_like(y)
        dz = out[: K + 1]
        np.multiply(rate, z, out=dz)
        dz[:-1] -= dpad * z[1:] ** 2
        dz[1 + np.searchsorted(t_on, t, side="right"):] = 0.0
        out[K + 1:] = -z[:K]
        return out

    return rhs


@dataclass
class BarrierEnvelope:
    """Time-resolved barriers on ``[-T, 0]``; evaluable at any ``t`` in the span."""

    ladder: object
    trajectory: Trajectory = field(repr=False)

    @property
    def K(self):
        return self.ladder.K

    @property
    def t(self):
        return self.trajectory.t

    def _columns(self, t):
        scalar = np.ndim(t) == 0
        y = self.trajectory.interpolate(np.atleast_1d(t))
        return (y[0] if scalar else y)

    def zeta(self, t):
        return self._columns(t)[..., : self.K + 1]

    def integral(self, t):
        """``I_k(t) = int_t^0 zeta_{k-1}`` for k = 0..K (``I_0 = 0``)."""
        y = self._columns(t)
        lead = np.zeros(y.shape[:-1] + (1,))
        return np.concatenate([lead, y[..., self.K + 1:]], axis=-1)

    def log_eta(self, t):
        return self.ladder.log_A - self.integral(t)

    def eta(self, t):
        return self.ladder.A * np.exp(-self.integral(t))

    def zeta_prime(self, t, branch_t=None):
        """Right-hand side of the zeta system at ``t`` (branch chosen at ``branch_t``)."""
        y = self._columns(t)
        return _zeta_rhs(self.ladder)(t if branch_t is None else branch_t, y)[: self.K + 1]


def build_barriers(ladder, config: IntegratorConfig | None = None) -> BarrierEnvelope:
    """Integrate the zeta system backward from 0 to ``-T`` with the I_k quadrature.

    The default error control is purely relative (``abs_tol`` at the bottom of
    the double range), since the frozen levels ``zeta_k(t_k)`` can sit hundreds
    of orders of magnitude below ``A_k``.
    """
    config = config or IntegratorConfig(rel_tol=1e-12, abs_tol=1e-300)
    config = config.with_events(ladder.event_times() + [-ladder.T])
    if config.method != "dopri5":
        from dataclasses import replace
        config = replace(config, method="dopri5")
    y0 = np.concatenate([ladder.A, np.zeros(ladder.K)])
    traj = integrate(_zeta_rhs(ladder), ShellState(0.0, Form.RESCALED, y0), -ladder.T, config)
    traj.meta["kind"] = "barrier"
    return BarrierEnvelope(ladder=ladder, trajectory=traj)


# -- bound verification ------------------------------------------------------------------


def lemma_grid(ladder, n=512):
    """Chebyshev-distributed samples of ``[-T, 0]`` plus every switching time."""
    j = np.arange(n)
    cheb = -ladder.T * 0.5 * (1 + np.cos(np.pi * (j + 0.5) / n))
    extra = [0.0, -ladder.T] + list(ladder.t_act[1:]) + [t / 2 for t in ladder.t_act[1:]]
    grid = np.unique(np.concatenate([cheb, np.array(extra, dtype=float)]))
    return grid[(grid >= -ladder.T) & (grid <= 0.0)]


@dataclass
class BoundCheck:
    family: str
    passed: bool
    worst_margin: float
    worst_k: int | None
    worst_t: float | None
    violations: list = field(default_factory=list)
    units: str = "relative"

    def to_dict(self):
        return asdict(self)


@dataclass
class BoundReport:
    checks: dict
    grid_size: int
    tolerance: float

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def to_dict(self):
        return {"passed": self.passed, "grid_size": self.grid_size, "tolerance": self.tolerance,
                "checks": {k: v.to_dict() for k, v in self.checks.items()}}


def _family(name, margins, ks, ts, tol, units="relative"):
    """Summarize a (k, t) margin table; entries that are NaN are not applicable."""
    m = np.asarray(margins, dtype=float)
    valid = ~np.isnan(m)
    if not valid.any():
        return BoundCheck(name, True, math.inf, None, None, [], units)
    flat = np.where(valid, m, np.inf)
    i, j = np.unravel_index(np.argmin(flat), flat.shape)
    bad = np.argwhere(valid & (m < -tol))
    violations = [{"k": int(ks[a]), "t": float(ts[b]), "margin": float(m[a, b])} for a, b in bad[:50]]
    return BoundCheck(name, len(bad) == 0, float(flat[i, j]), int(ks[i]), float(ts[j]), violations, units)


def verify_lemma_bounds(env: BarrierEnvelope, grid: int = 512, tolerance: float = 1e-9) -> BoundReport:
    """Check the four barrier-bound families on a Chebyshev grid.

    Margins are positive when an inequality holds with slack; a family passes
    when no margin is below ``-tolerance``.  ``z_bound`` and ``z0_bound``
    margins are relative to the comparison function, the two ``eta`` families
    are reported in log units (``log eta - log bound``).
    """
    if grid < 100:
        raise ValueError("grid must have at least 100 points")
    L = env.ladder
    K = L.K
    A, lA, t_act = L.A, L.log_A, L.t_act
    ts = lemma_grid(L, grid)
    Z = env.zeta(ts)  # (n, K+1)
    I = env.integral(ts)
    checks = {}

    if K >= 1:
        ks = np.arange(1, K + 1)
        ref = A[1:, None] * np.exp(0.5 * A[:-1, None] * np.maximum(ts[None, :], t_act[1:, None]))
        ratio = Z[:, 1:].T / ref
        margin = np.minimum(ratio - 1.0, 2.0 - ratio)
        checks["z_bound"] = _family("z_bound", margin, ks, ts, tolerance)
    else:
        checks["z_bound"] = _family("z_bound", np.full((1, 1), np.nan), [0], ts, tolerance)

    r0 = Z[:, 0] / A[0]
    checks["z0_bound"] = _family("z0_bound", np.minimum(r0 - 1.0, 2.0 - r0)[None, :], [0], ts, tolerance)

    # eta_k >= (3/4) A_k on [t_{k+1}, 0], k = 0..K-1 (eta_0 = A_0 trivially)
    rows, kq = [], []
    for k in range(0, K):
        m = np.log(4.0 / 3.0) - I[:, k]
        rows.append(np.where(ts >= t_act[k + 1], m, np.nan))
        kq.append(k)
    checks["eta_quarter_bound"] = _family(
        "eta_quarter_bound", np.array(rows) if rows else np.full((1, 1), np.nan),
        kq or [0], ts, tolerance, "log")

    rows, kg = [], []
    for k in range(2, K + 1):
        rows.append(5.0 * math.exp(lA[k - 1] - lA[k - 2]) - I[:, k])
        kg.append(k)
    checks["eta_global_bound"] = _family(
        "eta_global_bound", np.array(rows) if rows else np.full((1, 1), np.nan),
        kg or [0], ts, tolerance, "log")
    return BoundReport(checks=checks, grid_size=len(ts), tolerance=tolerance)


def boundary_slack(env: BarrierEnvelope, grid: int = 512):
    """Worst slack of the forward-time boundary inequalities on ``[t_k, 0]``.

    ``inviscid``: ``eta_{k-1} zeta_k - delta_k zeta_{k+1}^2 - zeta_k' - A_{k-1} zeta_k / 8``
    (relative to ``A_{k-1} zeta_k``), and ``viscous``:
    ``eta_{k-1} - rho_k N_k^2 - A_{k-1}/2`` (relative to ``A_{k-1}``).
    """
    L = env.ladder
    K = L.K
    ts = lemma_grid(L, grid)
    Z, E = env.zeta(ts), env.eta(ts)
    spec = ForcingSpec.from_ladder(L)
    dpad = L.delta_padded()
    worst_inv, worst_visc = math.inf, math.inf
    zr = _zeta_rhs(L)
    for i, t in enumerate(ts):
        y = np.concatenate([Z[i], env.integral(t)[1:]])
        dz = zr(t, y)[: K + 1]
        mask = cutoff_vector(spec, t)
        for k in range(1, K + 1):
            if t < L.t_act[k]:
                continue
            nxt = dpad[k] * Z[i, k + 1] ** 2 if k < K else 0.0
            s = E[i, k - 1] * Z[i, k] - nxt - dz[k] - L.A[k - 1] * Z[i, k] / 8
            worst_inv = min(worst_inv, s / (L.A[k - 1] * Z[i, k]))
            v = E[i, k - 1] - mask[k] * L.params.nu * L.N[k] ** 2 - 0.5 * L.A[k - 1]
            worst_visc = min(worst_visc, v / L.A[k - 1])
    return {"inviscid": worst_inv, "viscous": worst_visc}


# -- membership monitoring ------------------------------------------------------------------


@dataclass
class MembershipLog:
    t: np.ndarray
    margins: np.ndarray  # (n_snapshots, K+1): min(x - eta, zeta - x)
    tolerance: np.ndarray
    worst: np.ndarray
    escape_time: float | None
    escape_mode: int | None
    boundary_checks: int = 0
    boundary_violations: list = field(default_factory=list)

    @property
    def escaped(self):
        return self.escape_time is not None

    def normalized_worst(self, A):
        return self.worst / np.asarray(A)

    def summary(self, A=None):
        out = {
            "escaped": self.escaped,
            "escape_time": self.escape_time,
            "escape_mode": self.escape_mode,
            "worst_margin": self.worst.tolist(),
            "boundary_checks": self.boundary_checks,
            "boundary_violations": len(self.boundary_violations),
        }
        if A is not None:
            out["worst_margin_over_A"] = self.normalized_worst(A).tolist()
        return out


def monitor_membership(traj: Trajectory, env: BarrierEnvelope, rhs=None,
                       rel_tolerance: float = 1e-8, near: float = 0.01) -> MembershipLog:
    """Signed margins of every snapshot against ``[eta_k, zeta_k]``.

    A snapshot escapes when some margin is below ``-rel_tolerance * A_k``.  With
    ``rhs`` (the trajectory's vector field ``rhs(t, x)``) the boundary
    inequalities are also evaluated at snapshots within ``near`` (relative) of
    a barrier: with ``x_k`` placed on ``zeta_k`` one needs ``x_k' >= zeta_k'``,
    and with ``x_k`` on ``eta_k``, ``x_k' <= eta_k'``.
    """
    if Form(traj.form) is not Form.RESCALED:
        raise SpanMismatch("membership is defined for rescaled trajectories")
    L = env.ladder
    if traj.size != L.size:
        raise SpanMismatch(f"trajectory has {traj.size} modes, barriers have {L.size}")
    lo, hi = traj.span()
    blo, bhi = env.trajectory.span()
    if lo < blo - 1e-15 * abs(blo) or hi > bhi:
        raise SpanMismatch(f"trajectory span [{lo}, {hi}] exceeds barrier span [{blo}, {bhi}]")
    ts = traj.t
    Z, E = env.zeta(ts), env.eta(ts)
    X = traj.x
    margins = np.minimum(X - E, Z - X)
    tol = rel_tolerance * L.A
    worst = margins.min(axis=0)
    bad = np.argwhere(margins < -tol[None, :])
    escape_t = escape_k = None
    if bad.size:
        order = np.argsort(-ts[bad[:, 0]]) if traj.direction < 0 else np.argsort(ts[bad[:, 0]])
        first = bad[order[0]]
        escape_t, escape_k = float(ts[first[0]]), int(first[1])

    checks, violations = 0, []
    if rhs is not None:
        zr = _zeta_rhs(L)
        K = L.K
        for i, t in enumerate(ts):
            t_branch = np.nextafter(t, -np.inf)  # backward-time side of the snapshot
            zp = zr(t_branch, np.concatenate([Z[i], env.integral(t)[1:]]))[: K + 1]
            etap = np.zeros(K + 1)
            etap[1:] = E[i, 1:] * Z[i, :-1]
            for k in range(K + 1):
                if abs(X[i, k] - Z[i, k]) <= near * abs(Z[i, k]):
                    xs = X[i].copy()
                    xs[k] = Z[i, k]
                    d = rhs(t_branch, xs)[k]
                    checks += 1
                    if d < zp[k] - 1e-9 * abs(zp[k]) - 1e-300:
                        violations.append({"t": float(t), "k": k, "barrier": "zeta",
                                           "x_prime": float(d), "barrier_prime": float(zp[k])})
                if abs(X[i, k] - E[i, k]) <= near * abs(E[i, k]):
                    xs = X[i].copy()
                    xs[k] = E[i, k]
                    d = rhs(t_branch, xs)[k]
                    checks += 1
                    if d > etap[k] + 1e-9 * abs(etap[k]) + 1e-300:
                        violations.append({"t": float(t), "k": k, "barrier": "eta",
                                           "x_prime": float(d), "barrier_prime": float(etap[k])})
    log = MembershipLog(t=ts.copy(), margins=margins, tolerance=tol, worst=worst,
                        escape_time=escape_t, escape_mode=escape_k,
                        boundary_checks=checks, boundary_violations=violations)
    traj.excursions = log
    return log


def trajectory_rhs(traj, ladder):
    """The vector field a backward Galerkin trajectory was computed with."""
    return galerkin_rhs(ladder, traj.meta.get("mode", "viscous-masked"))
