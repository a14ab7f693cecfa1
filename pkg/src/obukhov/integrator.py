"""Adaptive time stepping for the shell-model systems, forward or backward.

The stepper is the Dormand-Prince 5(4) embedded pair with PI step-size
control.  Backward runs are handled by the substitution ``tau = -t`` with a
negated right-hand side, so the core loop always advances ``tau``.  Known
switching times are *landed on*: a step is shortened so that its endpoint is
bitwise equal to the event time, and stage evaluations at a step's endpoints
are nudged one ulp into the step interval so that right-hand sides with a
jump at an event see the branch belonging to that interval.

``method="integrating-factor"`` is a Lawson-type variant of the same tableau:
a diagonal linear part ``-lam(t) * x`` with known integral is propagated
exactly and only the remainder goes through the Runge-Kutta stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .compensated import CompensatedState
from .errors import AmplificationBudgetExceeded, NonFiniteState, StepSizeCollapse
from .model import Form, ForcingSpec, ShellState, cutoff_vector, rescaled_kernel, rho_integral

__all__ = [
    "IntegratorConfig",
    "StepStats",
    "Trajectory",
    "RescaledDamping",
    "integrate",
    "integrate_backward_galerkin",
    "galerkin_rhs",
    "amplification_budget",
    "roundtrip",
    "RoundTrip",
]

METHODS = ("dopri5", "integrating-factor")

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_AM = np.zeros((7, 7))
for _i, _row in enumerate(_A):
    _AM[_i, :len(_row)] = _row
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# 5th minus embedded 4th order weights.
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40])
_ORDER = 5


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "dopri5"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-30
    max_step: float = math.inf
    min_step: float = 1e-300
    event_times: tuple = ()
    dense_output: tuple | None = None
    first_step: float | None = None
    max_steps: int = 2_000_000
    compensated: bool = False
    safety: float = 0.9

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not 0 < self.min_step <= self.max_step:
            raise ValueError("need 0 < min_step <= max_step")
        events = tuple(float(t) for t in self.event_times)
        if any(b < a for a, b in zip(events, events[1:])):
            raise ValueError("event_times must be sorted ascending")
        object.__setattr__(self, "event_times", events)
        if self.dense_output is not None:
            object.__setattr__(self, "dense_output", tuple(float(t) for t in self.dense_output))

    def with_events(self, times):
        merged = sorted(set(self.event_times) | {float(t) for t in times})
        return replace(self, event_times=tuple(merged))

    def to_dict(self):
        return {
            "method": self.method,
            "rel_tol": self.rel_tol,
            "abs_tol": self.abs_tol,
            "max_step": None if math.isinf(self.max_step) else self.max_step,
            "min_step": self.min_step,
            "event_times": list(self.event_times),
            "dense_output": None if self.dense_output is None else list(self.dense_output),
            "first_step": self.first_step,
            "max_steps": self.max_steps,
            "compensated": self.compensated,
            "safety": self.safety,
        }

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        if data.get("max_step") is None:
            data.pop("max_step", None)
        for key in ("event_times", "dense_output"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)


@dataclass
class StepStats:
    accepted: int = 0
    rejected: int = 0
    nfev: int = 0
    min_step: float = math.inf
    max_step: float = 0.0

    def to_dict(self):
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "nfev": self.nfev,
            "min_step": self.min_step,
            "max_step": self.max_step,
        }


@dataclass
class Trajectory:
    """Ordered snapshots of a solution plus the step data for dense output.

    ``t``/``x`` are the snapshots.  Unless a dense-output grid was requested
    they are exactly the accepted step endpoints.  ``node_t``/``node_x`` and
    the per-interval one-sided slopes ``slope_start``/``slope_end`` drive the
    cubic Hermite interpolant.
    """

    form: Form
    t: np.ndarray
    x: np.ndarray
    node_t: np.ndarray
    node_x: np.ndarray
    slope_start: np.ndarray
    slope_end: np.ndarray
    stats: StepStats = field(default_factory=StepStats)
    status: str = "complete"
    meta: dict = field(default_factory=dict)
    excursions: object = None

    def __post_init__(self):
        self.form = Form(self.form)

    def __len__(self):
        return len(self.t)

    @property
    def direction(self):
        if len(self.node_t) < 2:
            return 1.0
        return 1.0 if self.node_t[-1] > self.node_t[0] else -1.0

    @property
    def size(self):
        return self.x.shape[1]

    def state(self, i) -> ShellState:
        return ShellState(float(self.t[i]), self.form, self.x[i].copy())

    def final(self) -> ShellState:
        return self.state(-1)

    def span(self):
        return float(min(self.node_t[0], self.node_t[-1])), float(max(self.node_t[0], self.node_t[-1]))

    def interpolate(self, times):
        """Cubic Hermite dense output; returns node values exactly at node times."""
        times = np.atleast_1d(np.asarray(times, dtype=float))
        d = self.direction
        tau_nodes = d * self.node_t
        tau = d * times
        lo, hi = tau_nodes[0], tau_nodes[-1]
        if np.any((tau < lo) | (tau > hi)):
            raise ValueError("interpolation time outside the trajectory span")
        if len(tau_nodes) == 1:
            return np.repeat(self.node_x[:1], len(times), axis=0)
        idx = np.clip(np.searchsorted(tau_nodes, tau, side="right") - 1, 0, len(tau_nodes) - 2)
        exact = tau_nodes[idx] == tau
        h = tau_nodes[idx + 1] - tau_nodes[idx]
        th = ((tau - tau_nodes[idx]) / h)[:, None]
        y0, y1 = self.node_x[idx], self.node_x[idx + 1]
        # slopes are d/dt; convert to d/dtau
        f0, f1 = d * self.slope_start[idx], d * self.slope_end[idx]
        hh = h[:, None]
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th ** 2 * (3 - 2 * th)
        h11 = th ** 2 * (th - 1)
        out = h00 * y0 + h10 * hh * f0 + h01 * y1 + h11 * hh * f1
        out[exact] = y0[exact]
        at_end = tau == tau_nodes[-1]
        out[at_end] = self.node_x[-1]
        return out

    def resampled(self, times):
        """A copy whose snapshots are the given times (step data unchanged)."""
        times = np.asarray(times, dtype=float)
        return replace(self, t=times.copy(), x=self.interpolate(times), meta=dict(self.meta))

    def index_of(self, time):
        """Index of the snapshot at exactly ``time``; raises KeyError if absent."""
        hits = np.flatnonzero(self.t == time)
        if hits.size == 0:
            raise KeyError(time)
        return int(hits[0])


@dataclass(frozen=True)
class RescaledDamping:
    """Linear part ``-mask_k(t) nu N_k^2 x_k`` of the rescaled system.

    ``masked=True`` uses the cutoff ``rho_k``, ``False`` the full dissipation.
    """

    rate: np.ndarray
    t_act: np.ndarray
    masked: bool = True

    @classmethod
    def from_ladder(cls, ladder, masked=True):
        return cls(rate=ladder.params.nu * ladder.N ** 2, t_act=np.asarray(ladder.t_act, dtype=float),
                   masked=masked)

    def mask(self, t):
        if not self.masked:
            return np.ones_like(self.rate)
        return cutoff_vector(ForcingSpec(self.t_act), t)

    def coefficient(self, t):
        return self.rate * self.mask(t)

    def integral(self, ta, tb):
        """``int_{ta}^{tb} coefficient(s) ds`` componentwise."""
        if not self.masked:
            return self.rate * (tb - ta)
        out = np.empty_like(self.rate)
        out[0] = tb - ta
        tk = self.t_act[1:]
        # rho_k(s) = rho(s/t_k); substitute u = s/t_k.  For s >= 0, u <= 0 and rho = 1.
        out[1:] = _masked_primitive(tb, tk) - _masked_primitive(ta, tk)
        return self.rate * out


def _masked_primitive(t, tk):
    """A primitive in ``t`` of ``rho(t / tk)`` (componentwise over ``tk < 0``)."""
    u = t / tk
    neg = u <= 0  # t >= 0: rho = 1
    out = np.empty_like(tk)
    out[neg] = t
    pos = ~neg
    if pos.any():
        out[pos] = tk[pos] * rho_integral(u[pos])
    return out


def _initial_step(fun, tau0, y0, f0, rtol, atol, span):
    # Components that start at zero carry no scale information under a tiny
    # abs_tol; the step controller takes care of them after the first step.
    sel = np.abs(y0) > 0
    if not sel.any():
        sel = np.ones_like(sel)
    scale = atol + rtol * np.abs(y0[sel])
    with np.errstate(over="ignore", invalid="ignore"):
        d0 = np.max(np.abs(y0[sel]) / scale)
        d1 = np.max(np.abs(f0[sel]) / scale)
    h0 = 1e-6 * span if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, span)
    y1 = y0 + h0 * f0
    f1 = fun(tau0 + h0, y1)
    with np.errstate(over="ignore", invalid="ignore"):
        d2 = np.max(np.abs(f1 - f0)[sel] / scale) / h0
    if not math.isfinite(d2):
        return h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6 * h0, 1e-6 * span)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / _ORDER)
    return min(100 * h0, h1, span)


def _ulp_floor(tau):
    return 8 * math.ulp(max(abs(tau), 1e-300))


def integrate(rhs, initial: ShellState, t_end: float, config: IntegratorConfig | None = None,
              linear=None, on_collapse="raise", post_step=None) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``initial.t`` to ``t_end`` (either direction).

    With ``config.method == "integrating-factor"``, ``rhs`` is the remainder
    after the linear part ``-linear.coefficient(t) * y`` and ``linear`` must
    provide ``coefficient(t)`` and ``integral(ta, tb)``.

    ``on_collapse="return"`` returns the partial trajectory with
    ``status="collapsed"`` instead of raising StepSizeCollapse.
    ``post_step(t, y)`` may return a modified state after each accepted step.
    """
    config = config or IntegratorConfig()
    t0 = float(initial.t)
    t_end = float(t_end)
    if t_end == t0:
        raise ValueError("t_end must differ from the initial time")
    use_if = config.method == "integrating-factor"
    if use_if and linear is None:
        raise ValueError("integrating-factor method needs a linear part")
    d = 1.0 if t_end > t0 else -1.0
    tau0, tau_end = d * t0, d * t_end
    span = tau_end - tau0
    rtol, atol = config.rel_tol, config.abs_tol
    stats = StepStats()

    def g(tau, y):  # d/dtau of y
        stats.nfev += 1
        t = d * tau
        out = rhs(t, y)
        if use_if:
            out = out - linear.coefficient(t) * y
        return out if d > 0 else -out

    events = [d * t for t in config.event_times if min(t0, t_end) < t < max(t0, t_end)]
    events = sorted(set(events))
    event_set = set(events)
    y = np.array(initial.x, dtype=float)
    f_start = g(math.nextafter(tau0, tau_end), y)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(f_start))):
        raise NonFiniteState(t0)

    node_t, node_x, s_start, s_end = [t0], [y.copy()], [], []
    comp = CompensatedState(y) if config.compensated else None
    tau = tau0
    max_h = min(config.max_step, span)
    if config.first_step is not None:
        h = min(config.first_step, max_h)
    else:
        h = min(_initial_step(g, tau0, y, f_start, rtol, atol, span), max_h)
    err_prev = 1.0
    ev_i = 0
    status = "complete"
    last_rejected = False
    collapse = None

    with np.errstate(over="ignore", invalid="ignore"):
        while tau < tau_end:
            if stats.accepted + stats.rejected >= config.max_steps:
                raise RuntimeError(f"exceeded max_steps={config.max_steps} at t={d * tau!r}")
            while ev_i < len(events) and events[ev_i] <= tau:
                ev_i += 1
            target = events[ev_i] if ev_i < len(events) else tau_end
            h = min(h, max_h)
            if tau + h >= target or tau + 1.01 * h >= target:
                h = target - tau
                tau_next = target
            else:
                tau_next = tau + h
            floor = max(config.min_step, _ulp_floor(tau))
            if h < floor:
                collapse = (d * tau, h)
                break

            k = np.empty((7, y.size))
            t_in_lo = math.nextafter(tau, tau_next)
            t_in_hi = math.nextafter(tau_next, tau)
            if use_if:
                # Lawson transform v = exp(E) x, E(t) = int_{t_start}^t coef; v = x at step start
                t_start = d * tau
                stats.nfev += 1
                k[0] = d * rhs(d * t_in_lo, y)
                for i in range(1, 7):
                    tau_i = t_in_hi if _C[i] == 1.0 else tau + _C[i] * h
                    E_i = linear.integral(t_start, d * tau_i)
                    v_i = y + h * (_AM[i, :i] @ k[:i])
                    stats.nfev += 1
                    k[i] = d * np.exp(E_i) * rhs(d * tau_i, np.exp(-E_i) * v_i)
                decay = np.exp(-E_i)
                incr = h * (_B @ k)
                y_new = decay * (y + incr)
                err_vec = decay * (h * (_E @ k))
            else:
                k[0] = f_start
                for i in range(1, 7):
                    tau_i = t_in_hi if _C[i] == 1.0 else tau + _C[i] * h
                    k[i] = g(tau_i, y + h * (_AM[i, :i] @ k[:i]))
                incr = h * (_B @ k)
                y_new = y + incr
                err_vec = h * (_E @ k)

            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = float(np.max(np.abs(err_vec) / scale))
            if not (math.isfinite(err) and math.isfinite(float(y_new.sum()))):
                err = math.inf

            if err <= 1.0:
                stats.accepted += 1
                stats.min_step = min(stats.min_step, h)
                stats.max_step = max(stats.max_step, h)
                landed_on_event = tau_next in event_set or tau_next == tau_end
                if comp is not None and not use_if:
                    comp = comp.add(incr)
                    y_new = comp.value()
                if post_step is not None:
                    y_adj = post_step(d * tau_next, y_new)
                    if y_adj is not y_new:
                        y_new = np.asarray(y_adj, dtype=float)
                        if comp is not None:
                            comp = CompensatedState(y_new)
                if use_if or post_step is not None:
                    f_end = g(t_in_hi, y_new)
                else:
                    f_end = k[6]
                s_start.append(d * f_start)
                s_end.append(d * f_end)
                tau = tau_next
                y = y_new
                node_t.append(d * tau)
                node_x.append(y.copy())
                if tau >= tau_end:
                    break
                if landed_on_event or use_if or post_step is not None:
                    f_start = g(math.nextafter(tau, tau_end), y)
                else:
                    f_start = f_end
                fac = config.safety * err ** (-0.7 / _ORDER) * err_prev ** (0.4 / _ORDER) if err > 0 else 10.0
                fac = min(10.0, max(0.2, fac))
                if last_rejected:
                    fac = min(fac, 1.0)
                h = h * fac
                err_prev = max(err, 1e-4)
                last_rejected = False
            else:
                stats.rejected += 1
                fac = 0.2 if not math.isfinite(err) else max(0.2, config.safety * err ** (-1 / _ORDER))
                h = h * fac
                last_rejected = True

    node_t = np.array(node_t)
    node_x = np.array(node_x)
    dim = node_x.shape[1]
    traj = Trajectory(
        form=initial.form,
        t=node_t,
        x=node_x,
        node_t=node_t,
        node_x=node_x,
        slope_start=np.array(s_start).reshape(-1, dim),
        slope_end=np.array(s_end).reshape(-1, dim),
        stats=stats,
        status=status,
        meta={"method": config.method, "rel_tol": rtol, "abs_tol": atol,
              "compensated": config.compensated, "events": list(config.event_times)},
    )
    if collapse is not None:
        traj.status = "collapsed"
        traj.meta["collapse_t"], traj.meta["collapse_step"] = collapse
        if on_collapse == "raise":
            raise StepSizeCollapse(collapse[0], collapse[1], traj)
        return traj
    if not np.all(np.isfinite(node_x)):
        raise NonFiniteState(float(node_t[-1]), traj)
    if config.dense_output is not None:
        grid = set(config.dense_output) | {t for t in config.event_times
                                           if min(t0, t_end) <= t <= max(t0, t_end)}
        grid |= {t0, t_end}
        grid = np.array(sorted(grid, reverse=d < 0))
        traj = traj.resampled(grid)
    return traj


# -- backward construction ---------------------------------------------------------------

BACKWARD_MODES = ("viscous-masked", "inviscid")


def galerkin_rhs(ladder, mode="viscous-masked", split=False):
    """``rhs(t, x)`` of the truncated rescaled system.

    ``split=True`` returns ``(nonlinear, linear)`` for the integrating-factor
    method instead of the full right-hand side.
    """
    if mode not in BACKWARD_MODES + ("viscous",):
        raise ValueError(f"unknown mode {mode!r}")
    kernel = rescaled_kernel(ladder)
    n = ladder.size
    zeros = np.zeros(n)
    if mode == "inviscid" or ladder.params.nu == 0:
        def rhs(t, x):
            return kernel(x, zeros)
        return (rhs, None) if split else rhs
    damping = RescaledDamping.from_ladder(ladder, masked=(mode == "viscous-masked"))
    if split:
        return (lambda t, x: kernel(x, zeros)), damping

    def rhs(t, x):
        return kernel(x, damping.mask(t))

    return rhs


def amplification_budget(ladder):
    """Per-mode worst-case backward amplification ``exp(nu N_k^2 int rho_k)`` over ``[-T, 0]``."""
    damping = RescaledDamping.from_ladder(ladder, masked=True)
    with np.errstate(over="ignore"):
        return np.exp(damping.integral(-ladder.T, 0.0))


def integrate_backward_galerkin(ladder, terminal=None, mode="viscous-masked",
                                config: IntegratorConfig | None = None, force=False,
                                clamp=None, on_collapse="raise") -> Trajectory:
    """Solve the truncated rescaled system backward from ``x_k(0) = A_k`` to ``-T``.

    The run refuses to start when the predicted anti-dissipative amplification
    times ``rel_tol`` exceeds 1% of the lower-barrier level ``(3/4) A_k``
    (relative), unless ``force``.  ``clamp`` may be a BarrierEnvelope; states are
    then projected onto ``[eta_k, zeta_k]`` after every step and the trajectory
    is marked as clamped.
    """
    config = config or IntegratorConfig()
    terminal = np.array(ladder.A if terminal is None else terminal, dtype=float)
    if mode not in BACKWARD_MODES:
        raise ValueError(f"mode must be one of {BACKWARD_MODES}")
    amp = amplification_budget(ladder) if mode == "viscous-masked" else np.ones(ladder.size)
    budget = 1e-2 * 0.75
    if not force:
        for k, a in enumerate(amp):
            if not a * config.rel_tol <= budget:
                raise AmplificationBudgetExceeded(k, float(a), budget / config.rel_tol)
    config = config.with_events(ladder.event_times() + [-ladder.T])
    post = None
    if clamp is not None:
        def post(t, x):
            z, e = clamp.zeta(t), clamp.eta(t)
            return np.clip(x, e, z)
    if config.method == "integrating-factor":
        rhs, linear = galerkin_rhs(ladder, mode, split=True)
        if linear is None:
            config = replace(config, method="dopri5")
    else:
        rhs, linear = galerkin_rhs(ladder, mode), None
    traj = integrate(rhs, ShellState(0.0, Form.RESCALED, terminal), -ladder.T, config,
                     linear=linear, on_collapse=on_collapse, post_step=post)
    traj.meta.update({"mode": mode, "clamped": clamp is not None,
                      "amplification": amp.tolist(), "ladder": ladder.params.to_dict()})
    return traj


@dataclass
class RoundTrip:
    backward: Trajectory
    forward: Trajectory
    terminal_error: np.ndarray


def roundtrip(ladder, config: IntegratorConfig | None = None, mode="viscous-masked",
              force=False) -> RoundTrip:
    """Backward construction, then forward re-integration of the same system to 0.

    ``terminal_error[k] = |x_k^fwd(0) - A_k| / A_k``.
    """
    config = config or IntegratorConfig()
    back = integrate_backward_galerkin(ladder, mode=mode, config=config, force=force)
    start = back.final()
    cfg = config.with_events(ladder.event_times() + [-ladder.T])
    if config.method == "integrating-factor" and mode == "viscous-masked" and ladder.params.nu > 0:
        rhs, linear = galerkin_rhs(ladder, mode, split=True)
    else:
        cfg = replace(cfg, method="dopri5")
        rhs, linear = galerkin_rhs(ladder, mode), None
    fwd = integrate(rhs, start, 0.0, cfg, linear=linear)
    fwd.meta.update({"mode": mode, "ladder": ladder.params.to_dict()})
    err = np.abs(fwd.x[-1] - ladder.A) / ladder.A
    return RoundTrip(back, fwd, err)
