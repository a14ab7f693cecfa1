"""Post-processing of trajectories: energy balance, C^sigma norms, blow-up flags,
Galerkin convergence and the regularity of the recorded force.

Everything here is a pure function of finished trajectories; reports carry
``to_dict`` for JSON output and tables can be written as CSV.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import FormMismatch
from .integrator import IntegratorConfig, integrate, integrate_backward_galerkin
from .ladder import build_ladder
from .model import Form, ForceRecord, ShellState, convert, recorded_force

__all__ = [
    "EnergyReport",
    "NormReport",
    "BlowupReport",
    "GalerkinReport",
    "RegularityReport",
    "energy",
    "besov_norm",
    "norm_report",
    "blowup_indicator",
    "galerkin_convergence",
    "force_regularity",
    "fd_weights",
    "is_cascade",
    "arrival_times",
    "write_csv",
]


def _l2_values(form, x, ladder):
    form = Form(form)
    if form is Form.L2:
        return np.asarray(x, dtype=float)
    if form is Form.RESCALED:
        return x * ladder.N ** (-ladder.params.alpha)
    return x * ladder.N ** (-(ladder.params.alpha - 1))


def refined_grid(traj, refine=4):
    """Node times with every accepted step split into ``refine`` equal pieces."""
    nodes = traj.node_t
    if len(nodes) < 2:
        return nodes.copy()
    frac = np.arange(refine) / refine
    inner = nodes[:-1, None] + (nodes[1:] - nodes[:-1])[:, None] * frac[None, :]
    return np.concatenate([inner.ravel(), nodes[-1:]])


def _cumtrapz(y, t):
    out = np.zeros_like(y)
    out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


# -- energy --------------------------------------------------------------------------


@dataclass
class EnergyReport:
    t: np.ndarray
    e: np.ndarray
    dissipation: np.ndarray  # int_{t0}^t sum nu N_k^2 X_k^2
    work: np.ndarray  # int_{t0}^t sum X_k f_k
    residual: np.ndarray
    mode: str

    @property
    def relative_residual(self):
        scale = abs(self.e[0]) if self.e[0] != 0 else 1.0
        return self.residual / scale

    @property
    def max_relative_residual(self):
        return float(np.max(np.abs(self.relative_residual)))

    def forward_increase(self):
        """Largest relative rise of ``e`` between consecutive samples, read forward in time."""
        order = np.argsort(self.t)
        e = self.e[order]
        scale = max(np.max(np.abs(e)), 1e-300)
        return float(max(np.max(np.diff(e), initial=0.0), 0.0) / scale)

    def to_dict(self):
        return {"mode": self.mode, "samples": len(self.t), "e_start": float(self.e[0]),
                "e_end": float(self.e[-1]), "max_abs_residual": float(np.max(np.abs(self.residual))),
                "max_relative_residual": self.max_relative_residual,
                "forward_increase": self.forward_increase()}


def energy(traj, ladder, force_record: ForceRecord | None = None, mode=None, refine=4) -> EnergyReport:
    """Energy ``e = 1/2 sum X_k^2`` and the balance residual along a trajectory.

    ``mode`` selects the physics the trajectory was computed with and
    defaults to ``traj.meta["mode"]``: ``"inviscid"`` (no dissipation, no
    force), ``"viscous"`` (full dissipation, no force) or
    ``"viscous-masked"`` (full dissipation plus the recorded force, which is
    what the damping mask amounts to in L2 form).  Integrals are trapezoidal
    on the dense-output grid with ``refine`` points per accepted step.
    """
    form = Form(traj.form)
    if form is Form.LINF and ladder is None:
        raise FormMismatch("converting to L2 needs the ladder")
    mode = mode or traj.meta.get("mode", "inviscid" if ladder.params.nu == 0 else "viscous")
    t = refined_grid(traj, refine)
    x = traj.interpolate(t)
    X = _l2_values(form, x, ladder)
    e = 0.5 * np.sum(X * X, axis=1)
    if mode == "inviscid":
        diss = np.zeros_like(t)
        power = np.zeros_like(t)
    else:
        diss = np.sum(ladder.params.nu * ladder.N ** 2 * X * X, axis=1)
        if mode == "viscous-masked":
            if form is not Form.RESCALED:
                raise FormMismatch("the masked system is integrated in rescaled form")
            rec = force_record
            if rec is None or len(rec.t) != len(t) or np.any(rec.t != t):
                rec = recorded_force(traj, ladder, times=t)
            power = np.sum(X * rec.f, axis=1)
        else:
            power = np.zeros_like(t)
    D = _cumtrapz(diss, t)
    W = _cumtrapz(power, t)
    residual = e + D - e[0] - W
    return EnergyReport(t=t, e=e, dissipation=D, work=W, residual=residual, mode=mode)


# -- norms ---------------------------------------------------------------------------


def besov_norm(state, sigma, ladder_or_N):
    """``sup_k N_k^sigma |X_k|`` and the index attaining it.

    ``state`` is an L2-form ShellState or a plain vector of X_k; other forms
    are converted first (which needs a ladder).
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if isinstance(state, ShellState):
        if state.form is not Form.L2:
            state = convert(state, Form.L2, ladder_or_N)
        X = state.x
    else:
        X = np.asarray(state, dtype=float)
    N = np.asarray(getattr(ladder_or_N, "N", ladder_or_N), dtype=float)
    weighted = N ** sigma * np.abs(X)
    k = int(np.argmax(weighted))
    return float(weighted[k]), k


@dataclass
class NormReport:
    t: np.ndarray
    sigmas: list
    values: np.ndarray  # (n_t, n_sigma)
    argmax: np.ndarray

    def to_dict(self):
        return {"sigmas": list(self.sigmas), "t": self.t.tolist(), "values": self.values.tolist(),
                "argmax": self.argmax.tolist()}


def norm_report(traj, ladder, sigmas) -> NormReport:
    X = _l2_values(traj.form, traj.x, ladder)
    vals = np.empty((len(traj.t), len(sigmas)))
    arg = np.empty_like(vals, dtype=int)
    for j, s in enumerate(sigmas):
        w = ladder.N ** s * np.abs(X)
        arg[:, j] = np.argmax(w, axis=1)
        vals[:, j] = np.max(w, axis=1)
    return NormReport(t=traj.t.copy(), sigmas=list(sigmas), values=vals, argmax=arg)


# -- blow-up -----------------------------------------------------------------------------


@dataclass
class BlowupReport:
    blown_up: bool
    t_detect: float | None
    reason: str | None
    threshold: float
    start_norm: float
    max_norm: float
    t_reached: float

    def to_dict(self):
        return dict(self.__dict__)


def blowup_indicator(traj, ladder, sigma, threshold=None, factor=1e6) -> BlowupReport:
    """Flag the first snapshot whose C^sigma norm exceeds ``threshold``.

    The default threshold is ``factor`` times the norm of the first snapshot.
    A trajectory that ended in step-size collapse is flagged at the time
    reached.
    """
    X = _l2_values(traj.form, traj.x, ladder)
    norms = np.max(ladder.N ** sigma * np.abs(X), axis=1)
    start = float(norms[0])
    if threshold is None:
        threshold = factor * start
    hits = np.flatnonzero(norms > threshold)
    t_end = float(traj.t[-1])
    if hits.size:
        i = int(hits[0])
        return BlowupReport(True, float(traj.t[i]), "norm", float(threshold), start, float(norms.max()), t_end)
    if traj.status == "collapsed":
        return BlowupReport(True, t_end, "step-size-collapse", float(threshold), start, float(norms.max()), t_end)
    return BlowupReport(False, None, None, float(threshold), start, float(norms.max()), t_end)


def continue_forward(ladder, start: ShellState, t_end, config=None, mode="viscous"):
    """Forward run of the rescaled system that is allowed to stop at collapse."""
    from .integrator import galerkin_rhs

    config = config or IntegratorConfig()
    traj = integrate(galerkin_rhs(ladder, mode), start, t_end, config, on_collapse="return")
    traj.meta.update({"mode": mode, "ladder": ladder.params.to_dict()})
    return traj


# -- Galerkin convergence -----------------------------------------------------------------


@dataclass
class GalerkinReport:
    K_list: list
    modes: int
    pairs: dict  # (K, K') -> sup_t |x_k^K - x_k^K'| for k < modes
    relative: dict  # same, divided by A_k
    t: np.ndarray = field(repr=False)

    def max_relative(self):
        return max((float(np.max(v)) for v in self.relative.values()), default=0.0)

    def to_dict(self):
        return {"K_list": list(self.K_list), "modes": self.modes,
                "pairs": {f"{a}-{b}": v.tolist() for (a, b), v in self.pairs.items()},
                "relative": {f"{a}-{b}": v.tolist() for (a, b), v in self.relative.items()},
                "max_relative": self.max_relative()}


def galerkin_convergence(params, K_list, config=None, mode="viscous-masked", grid=2048,
                         modes=None, workers=1, force=False) -> GalerkinReport:
    """Sup-in-time differences of low modes between truncation levels.

    Each truncation is integrated backward from its own terminal profile; the
    solutions are compared on a common grid of ``[-T, 0]`` (which does not
    depend on K) for ``k < modes`` (default ``min(K_list) - 3``, i.e. k up to
    ``min(K) - 4``), for every pair of consecutive K.
    """
    K_list = list(K_list)
    if len(K_list) < 2:
        raise ValueError("K_list needs at least two entries")
    config = config or IntegratorConfig()
    ladders = [build_ladder(params.replace(K=K)) for K in K_list]
    modes = modes if modes is not None else max(min(K_list) - 3, 1)

    def run(L):
        return integrate_backward_galerkin(L, mode=mode, config=config, force=force)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            trajs = list(pool.map(run, ladders))
    else:
        trajs = [run(L) for L in ladders]
    T = ladders[0].T
    j = np.arange(grid)
    t = np.unique(np.concatenate([-T * 0.5 * (1 + np.cos(np.pi * j / (grid - 1))),
                                  np.asarray(ladders[0].event_times(), dtype=float)]))
    t = t[(t >= -T) & (t <= 0)]
    samples = [tr.interpolate(t)[:, :modes] for tr in trajs]
    A = ladders[0].A[:modes]
    pairs, rel = {}, {}
    for i in range(len(K_list) - 1):
        d = np.max(np.abs(samples[i] - samples[i + 1]), axis=0)
        pairs[(K_list[i], K_list[i + 1])] = d
        rel[(K_list[i], K_list[i + 1])] = d / A
    return GalerkinReport(K_list=K_list, modes=modes, pairs=pairs, relative=rel, t=t)


# -- forcing regularity ---------------------------------------------------------------


def fd_weights(offsets, order):
    """Finite-difference weights for the ``order``-th derivative on integer offsets."""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    V = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def _central_derivative(values, h, order):
    """Centered, fourth-order accurate derivative; interior samples only."""
    if order == 0:
        return values
    m = (order + 3) // 2
    w = fd_weights(np.arange(-m, m + 1), order)
    n = values.shape[0]
    if n <= 2 * m:
        raise ValueError("too few samples for the stencil")
    out = np.zeros((n - 2 * m,) + values.shape[1:])
    for i, wi in enumerate(w):
        out += wi * values[i:n - 2 * m + i]
    return out / h ** order


@dataclass
class RegularityReport:
    sigmas: list
    orders: list
    table: np.ndarray  # (n_sigma, n_order, K+1): sup_t N_k^sigma |d^j f_k / dt^j|
    support_violations: np.ndarray
    spacing: float

    def decreasing_from(self, k0, sigma_index=0, order=0):
        row = self.table[sigma_index, order, k0:]
        return bool(np.all(np.diff(row) < 0))

    def to_dict(self):
        return {"sigmas": list(self.sigmas), "orders": list(self.orders), "table": self.table.tolist(),
                "support_violations": self.support_violations.tolist(), "spacing": self.spacing}


def _regularity_table(rec, ladder, sigma_list, orders):
    steps = np.diff(rec.t)
    h = float(np.mean(steps))
    if len(orders) > 1 and not np.allclose(steps, h, rtol=1e-6, atol=0):
        raise ValueError("finite differences need a uniform sample grid")
    table = np.zeros((len(sigma_list), len(orders), rec.f.shape[1]))
    for j in orders:
        sup = np.max(np.abs(_central_derivative(rec.f, h, j)), axis=0)
        for i, s in enumerate(sigma_list):
            table[i, j] = ladder.N ** s * sup
    return table, h


def force_regularity(source, ladder, sigma_list=(2.0,), derivative_order=4, samples=4001) -> RegularityReport:
    """Sup norms ``N_k^sigma |d^j f_k|`` of the recorded force for ``j <= derivative_order``.

    ``source`` is either a backward Galerkin trajectory or a ForceRecord on a
    uniform grid.  A trajectory is sampled on a uniform grid of ``samples``
    points in ``[-T, 0]`` and, because ``|t_k|`` shrinks super-exponentially,
    also on a uniform window ``[max(-T, 4 t_k), 0]`` per mode; the sup is taken
    over all grids.  The support check counts nonzero samples of ``f_k`` in
    ``[t_k/2, 0]``.
    """
    if derivative_order > 4 or derivative_order < 0:
        raise ValueError("derivative_order must be in 0..4")
    orders = list(range(derivative_order + 1))
    if isinstance(source, ForceRecord):
        records = [source]
    else:
        windows = [-ladder.T] + sorted({max(-ladder.T, 4 * float(t)) for t in ladder.t_act[1:]})
        records = [recorded_force(source, ladder, times=np.linspace(lo, 0.0, samples))
                   for lo in dict.fromkeys(windows)]
    table, h = _regularity_table(records[0], ladder, sigma_list, orders)
    violations = records[0].support_violations()
    for rec in records[1:]:
        table = np.maximum(table, _regularity_table(rec, ladder, sigma_list, orders)[0])
        violations = violations + rec.support_violations()
    return RegularityReport(sigmas=list(sigma_list), orders=orders, table=table,
                            support_violations=violations, spacing=h)


# -- cascade timing ----------------------------------------------------------------


def arrival_times(t, x, theta=0.5):
    """Per-mode first time at which ``|x_k|`` reaches ``theta`` times its own maximum.

    "First" is in the order of the record, i.e. in the run's direction of
    integration.  Modes that stay identically zero get ``nan``.
    """
    t = np.asarray(t, dtype=float)
    a = np.abs(np.asarray(x, dtype=float))
    peak = a.max(axis=0)
    hit = a >= theta * peak
    out = t[np.argmax(hit, axis=0)]
    out[peak == 0] = np.nan
    return out


def is_cascade(t, arrivals):
    """True when arrival times increase strictly with k in the run's direction."""
    t = np.asarray(t, dtype=float)
    arr = np.asarray(arrivals, dtype=float)
    if arr.size < 2 or not np.all(np.isfinite(arr)):
        return False
    d = 1.0 if t[-1] >= t[0] else -1.0
    return bool(np.all(np.diff(d * arr) > 0))


# -- output --------------------------------------------------------------------------


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path

