"""Right-hand sides of the Obukhov shell model and its comparison variants.

Three equivalent forms of the same system are supported:

* ``l2``       X_k' = -nu N_k^2 X_k + N_{k-1}^a X_{k-1} X_k - N_k^a X_{k+1}^2 + f_k
* ``linf``     Y_k' = -nu N_k^2 Y_k + N_{k-1} Y_{k-1} Y_k
                      - (N_k/N_{k+1})^{2(a-1)} N_k Y_{k+1}^2 + h_k
* ``rescaled`` x_k' = -m_k nu N_k^2 x_k + x_{k-1} x_k - delta_k x_{k+1}^2

related by ``X_k = N_k^{-(a-1)} Y_k = N_k^{-a} x_k``.  All forms are Galerkin
truncated: the ``x_{K+1}`` term is dropped at ``k = K`` and ``x_{-1} = 0``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, FormMismatch

__all__ = [
    "Form",
    "ShellState",
    "ForcingSpec",
    "ForceRecord",
    "VariantKind",
    "ModelVariant",
    "rho",
    "rho_integral",
    "rhs_l2",
    "rhs_rescaled",
    "rhs_linf",
    "rhs_variant",
    "convert",
    "evaluate_cutoff",
    "cutoff_vector",
    "recorded_force",
    "l2_kernel",
    "rescaled_kernel",
    "linf_kernel",
]


class Form(str, enum.Enum):
    L2 = "l2"
    LINF = "linf"
    RESCALED = "rescaled"


@dataclass
class ShellState:
    t: float
    form: Form
    x: np.ndarray

    def __post_init__(self):
        self.form = Form(self.form)
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim != 1:
            raise DimensionMismatch("state must be a 1-d vector of mode amplitudes")


def _check(state, ladder, form):
    if state.form is not Form(form):
        raise FormMismatch(f"expected {Form(form).value} state, got {state.form.value}")
    if state.x.shape[-1] != ladder.size:
        raise DimensionMismatch(f"state has {state.x.shape[-1]} modes, ladder has {ladder.size}")


def _vector(values, n, name):
    if values is None:
        return np.zeros(n)
    values = np.broadcast_to(np.asarray(values, dtype=float), np.shape(values))
    if np.ndim(values) == 0:
        return np.full(n, float(values))
    if values.shape[-1] != n:
        raise DimensionMismatch(f"{name} has length {values.shape[-1]}, expected {n}")
    return values


def _shift_down(x):
    """``x_{k-1}`` with ``x_{-1} = 0``."""
    out = np.zeros_like(x)
    out[..., 1:] = x[..., :-1]
    return out


def _shift_up_sq(x):
    """``x_{k+1}**2`` with the ``k = K`` entry truncated to 0."""
    out = np.zeros_like(x)
    out[..., :-1] = x[..., 1:] ** 2
    return out


# -- array kernels (used directly by the integrator) ----------------------------


def l2_kernel(ladder):
    p = ladder.params
    damp = p.nu * ladder.N ** 2
    Na = ladder.N ** p.alpha
    Na_prev = _shift_down(Na)

    def f(X, force):
        return -damp * X + Na_prev * _shift_down(X) * X - Na * _shift_up_sq(X) + force

    return f


def rescaled_kernel(ladder):
    damp = ladder.params.nu * ladder.N ** 2
    delta = ladder.delta_padded()

    def f(x, mask):
        return -mask * damp * x + _shift_down(x) * x - delta * _shift_up_sq(x)

    return f


def linf_kernel(ladder):
    p = ladder.params
    N = ladder.N
    damp = p.nu * N ** 2
    N_prev = _shift_down(N)
    coupling = np.zeros_like(N)
    coupling[:-1] = (N[:-1] / N[1:]) ** (2 * (p.alpha - 1)) * N[:-1]

    def f(Y, force):
        return -damp * Y + N_prev * _shift_down(Y) * Y - coupling * _shift_up_sq(Y) + force

    return f


# -- state-level operations -----------------------------------------------------


def rhs_l2(state: ShellState, ladder, force=None):
    """Time derivative of the L2-form state under per-mode force ``f_k``."""
    _check(state, ladder, Form.L2)
    return l2_kernel(ladder)(state.x, _vector(force, ladder.size, "force"))


def rhs_rescaled(state: ShellState, ladder, dissipation_mask=None):
    """Time derivative of the rescaled state.

    ``dissipation_mask`` scales the viscous term per mode: all ones is the
    unforced viscous system, ``rho_k(t)`` is the damping-switch-off system and
    all zeros (the default) is inviscid.
    """
    _check(state, ladder, Form.RESCALED)
    return rescaled_kernel(ladder)(state.x, _vector(dissipation_mask, ladder.size, "mask"))


def rhs_linf(state: ShellState, ladder, force=None):
    _check(state, ladder, Form.LINF)
    return linf_kernel(ladder)(state.x, _vector(force, ladder.size, "force"))


def _to_l2_factor(form, ladder):
    a = ladder.params.alpha
    if form is Form.L2:
        return np.ones(ladder.size)
    if form is Form.LINF:
        return ladder.N ** (-(a - 1))
    return ladder.N ** (-a)


def convert(state: ShellState, to, ladder) -> ShellState:
    """Change the representation of ``state``; ``x`` may carry leading time axes."""
    to = Form(to)
    if state.x.shape[-1] != ladder.size:
        raise DimensionMismatch(f"state has {state.x.shape[-1]} modes, ladder has {ladder.size}")
    if to is state.form:
        return ShellState(state.t, to, state.x.copy())
    X = state.x * _to_l2_factor(state.form, ladder)
    return ShellState(state.t, to, X / _to_l2_factor(to, ladder))


# -- damping cutoff --------------------------------------------------------------


def _q(v):
    v = np.asarray(v, dtype=float)
    out = np.zeros_like(v)
    pos = v > 0
    out[pos] = np.exp(-1.0 / v[pos])
    return out


def rho(u):
    """Smooth decreasing cutoff: 1 on ``[0, 1/2]``, 0 on ``[1, inf)``.

    On ``(1/2, 1)`` it is the partition-of-unity blend
    ``q(2-2u) / (q(2-2u) + q(2u-1))`` with ``q(v) = exp(-1/v)``.
    """
    u = np.asarray(u, dtype=float)
    out = np.where(u <= 0.5, 1.0, 0.0)
    mid = (u > 0.5) & (u < 1.0)
    if np.any(mid):
        um = u[mid]
        a = _q(2 - 2 * um)
        b = _q(2 * um - 1)
        out = np.array(out, dtype=float)
        out[mid] = a / (a + b)
    return out if out.ndim else float(out)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def rho_integral(u):
    """``R(u) = int_0^u rho(v) dv`` for ``u >= 0``; constant ``3/4`` past ``u = 1``."""
    scalar = np.ndim(u) == 0
    uc = np.clip(np.atleast_1d(np.asarray(u, dtype=float)), 0.0, 1.0)
    out = np.minimum(uc, 0.5)
    mid = uc > 0.5
    if np.any(mid):
        hi = uc[mid]
        half = (hi - 0.5) / 2
        nodes = 0.5 + half[:, None] * (_GL_NODES[None, :] + 1)
        out[mid] += half * (rho(nodes) @ _GL_WEIGHTS)
    return float(out[0]) if scalar else out


@dataclass(frozen=True)
class ForcingSpec:
    """Cutoff schedule ``rho_k(t) = rho(t / t_k)`` for k >= 1, ``rho_0 = 1``."""

    t_act: np.ndarray

    @classmethod
    def from_ladder(cls, ladder):
        return cls(t_act=np.asarray(ladder.t_act, dtype=float))

    @property
    def size(self):
        return len(self.t_act)


def evaluate_cutoff(spec: ForcingSpec, k: int, t):
    """``rho_k(t)``; exactly 1 on ``[t_k/2, 0]`` and exactly 0 on ``[-T, t_k]``."""
    if k == 0:
        return np.ones_like(np.asarray(t, dtype=float)) if np.ndim(t) else 1.0
    return rho(np.asarray(t, dtype=float) / spec.t_act[k])


def cutoff_vector(spec: ForcingSpec, t: float):
    """All ``rho_k(t)`` at one time, as the dissipation mask for ``rhs_rescaled``."""
    u = t / spec.t_act
    out = np.where(u <= 0.5, 1.0, 0.0)
    mid = (u > 0.5) & (u < 1.0)
    if mid.any():
        out[mid] = rho(u[mid])
    out[0] = 1.0
    return out


# -- recorded force ----------------------------------------------------------------


@dataclass
class ForceRecord:
    """Force sampled along a trajectory, in rescaled (``g``) and L2 (``f``) units."""

    t: np.ndarray
    g: np.ndarray
    f: np.ndarray
    t_act: np.ndarray = field(repr=False)

    def support_violations(self):
        """Per-mode count of nonzero samples inside ``[t_k/2, 0]`` (should be 0)."""
        counts = np.zeros(self.f.shape[1], dtype=int)
        for k in range(1, self.f.shape[1]):
            inside = self.t >= self.t_act[k] / 2
            counts[k] = int(np.count_nonzero(self.f[inside, k]))
        counts[0] = int(np.count_nonzero(self.f[:, 0]))
        return counts


def recorded_force(trajectory, ladder, spec: ForcingSpec | None = None, times=None) -> ForceRecord:
    """Reconstruct ``g_k = (1 - rho_k) nu N_k^2 x_k`` and ``f_k = N_k^{-a} g_k``.

    Sampled at the trajectory's own snapshots, or at ``times`` via its dense
    output.
    """
    if Form(trajectory.form) is not Form.RESCALED:
        raise FormMismatch("recorded_force needs a rescaled-form trajectory")
    spec = spec or ForcingSpec.from_ladder(ladder)
    if times is None:
        t, x = trajectory.t, trajectory.x
    else:
        t = np.asarray(times, dtype=float)
        x = trajectory.interpolate(t)
    off = np.empty_like(x)
    for i, ti in enumerate(t):
        off[i] = 1.0 - cutoff_vector(spec, ti)
    g = off * ladder.params.nu * ladder.N ** 2 * x
    g[:, 0] = 0.0
    f = g * ladder.N ** (-ladder.params.alpha)
    return ForceRecord(t=np.asarray(t, dtype=float), g=g, f=f, t_act=np.asarray(spec.t_act))


# -- comparison variants -------------------------------------------------------------


class VariantKind(str, enum.Enum):
    SUPER_EXP_OBUKHOV = "super-exp-obukhov"
    GEOMETRIC_OBUKHOV = "geometric-obukhov"
    KATZ_PAVLOVIC = "katz-pavlovic"


@dataclass(frozen=True)
class ModelVariant:
    kind: VariantKind
    lam: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", VariantKind(self.kind))
        if self.kind is not VariantKind.SUPER_EXP_OBUKHOV:
            if self.lam is None or not self.lam > 1:
                raise ValueError("geometric variants need lam > 1")

    def frequencies(self, n, ladder=None):
        if self.kind is VariantKind.SUPER_EXP_OBUKHOV:
            if ladder is None:
                raise ValueError("the super-exponential variant needs a ladder")
            return np.asarray(ladder.N, dtype=float)
        return float(self.lam) ** np.arange(n)


def variant_kernel(variant: ModelVariant, n, nu, alpha, ladder=None):
    N = variant.frequencies(n, ladder)
    damp = nu * N ** 2
    Na = N ** alpha
    Na_prev = _shift_down(Na)
    if variant.kind is VariantKind.KATZ_PAVLOVIC:
        Na_trunc = Na.copy()
        Na_trunc[-1] = 0.0

        def f(X, force):
            X_next = np.zeros_like(X)
            X_next[..., :-1] = X[..., 1:]
            return -damp * X + Na_prev * _shift_down(X) ** 2 - Na_trunc * X * X_next + force

        return f

    def f(X, force):
        return -damp * X + Na_prev * _shift_down(X) * X - Na * _shift_up_sq(X) + force

    return f


def rhs_variant(X, variant: ModelVariant, nu, alpha, force=None, ladder=None):
    """L2-form derivative of a comparison model (KP or Obukhov on ``lam**k``)."""
    X = np.asarray(X.x if isinstance(X, ShellState) else X, dtype=float)
    n = X.shape[-1]
    if ladder is not None and variant.kind is VariantKind.SUPER_EXP_OBUKHOV and n != ladder.size:
        raise DimensionMismatch(f"state has {n} modes, ladder has {ladder.size}")
    return variant_kernel(variant, n, nu, alpha, ladder)(X, _vector(force, n, "force"))
