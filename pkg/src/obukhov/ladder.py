"""Model constants and the derived frequency/amplitude ladder.

The ladder is ``N_k = N0**(b**k)``; amplitudes ``A_k = N_k**beta``; the
high-high-low coefficients ``delta_k = (N_k / N_{k+1})**(2 alpha)``; the horizon
``T = c / A_0``; activation times ``t_1 = t_2 = -T`` and ``t_k = -c / A_{k-2}``.
"""

from __future__ import annotations

import enum
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

import mpmath
import numpy as np

from .errors import LadderOverflow, ParameterOutOfRange

__all__ = [
    "ValidationMode",
    "LadderParams",
    "Ladder",
    "ConstraintCheck",
    "ConstraintReport",
    "build_ladder",
    "validate_constraints",
    "figure2_params",
]

PRECISIONS = ("double", "double-double")
_LOG_MAX = math.log(np.finfo(float).max)


class ValidationMode(str, enum.Enum):
    STRICT_VISCOUS = "strict-viscous"
    STRICT_INVISCID = "strict-inviscid"
    ILLUSTRATIVE = "illustrative"


@dataclass(frozen=True)
class LadderParams:
    nu: float = 1.0
    alpha: float = 2.5
    N0: float = 1.5
    b: float = 1.15
    beta: float = 2.4
    c: float = 0.1
    K: int = 12
    s: float = 0.2
    precision: str = "double"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown ladder field(s): {sorted(unknown)}")
        kwargs = dict(data)
        if "K" in kwargs:
            kwargs["K"] = int(kwargs["K"])
        return cls(**kwargs)

    def replace(self, **changes):
        return LadderParams(**{**asdict(self), **changes})

    def digest(self):
        """Stable short hash used to tag exported files."""
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def figure2_params(K=12, **changes):
    """Parameters of the figure2 scenario (nu=1, alpha=5/2, N_k=1.5**1.15**k, beta=2.4)."""
    return LadderParams(nu=1.0, alpha=2.5, N0=1.5, b=1.15, beta=2.4, c=0.1, K=K,
                        s=0.2).replace(**changes)


def _basic_checks(p):
    """``(inequality, margin, strict)`` triples every parameter set must satisfy."""
    return [
        ("N0 > 1", p.N0 - 1.0, True),
        ("b > 1", p.b - 1.0, True),
        ("c > 0", p.c, True),
        ("K >= 0", float(p.K), False),
        ("s > 0", p.s, True),
        ("nu >= 0", p.nu, False),
        ("alpha >= 1", p.alpha - 1.0, False),
    ]


def _holds(margin, strict):
    return margin > 0 if strict else margin >= 0


def _range_checks(p, mode):
    mode = ValidationMode(mode)
    if mode is ValidationMode.STRICT_VISCOUS:
        lower = max(2 * p.b, p.alpha - p.s)
        return [
            ("nu > 0", p.nu),
            ("b < alpha/2", p.alpha / 2 - p.b),
            ("max(2b, alpha - s) < beta", p.beta - lower),
            ("beta < alpha", p.alpha - p.beta),
        ]
    if mode is ValidationMode.STRICT_INVISCID:
        lower = max(0.0, p.alpha - p.s)
        return [
            ("max(0, alpha - s) < beta", p.beta - lower),
            ("beta < alpha", p.alpha - p.beta),
        ]
    return [("beta > 0", p.beta)]


@dataclass(frozen=True, eq=False)
class Ladder:
    """Immutable ladder of derived sequences for one parameter set.

    ``log_N`` and ``log_A`` are kept alongside the values so that checks
    involving astronomically large ratios can be done in log space.
    """

    params: LadderParams
    N: np.ndarray
    A: np.ndarray
    delta: np.ndarray
    t_act: np.ndarray
    T: float
    log_N: np.ndarray
    log_A: np.ndarray
    lo: dict = field(default_factory=dict)

    @property
    def K(self):
        return self.params.K

    @property
    def size(self):
        return self.params.K + 1

    def event_times(self):
        """Switching times ``t_k`` and ``t_k/2`` inside ``[-T, 0)``, descending."""
        times = set()
        for k in range(1, self.size):
            times.add(float(self.t_act[k]))
            times.add(float(self.t_act[k]) / 2)
        return sorted((t for t in times if -self.T <= t < 0), reverse=True)

    def delta_padded(self):
        """``delta`` with a trailing zero, so ``delta_padded[k] * x[k+1]**2`` truncates at K."""
        return np.append(self.delta, 0.0)


def _high_precision_sequences(p, dps=50):
    with mpmath.workdps(dps):
        N0, b, alpha, beta, c = (mpmath.mpf(repr(v)) for v in (p.N0, p.b, p.alpha, p.beta, p.c))
        N = [N0 ** (b ** k) for k in range(p.K + 1)]
        A = [n ** beta for n in N]
        delta = [(N[k] / N[k + 1]) ** (2 * alpha) for k in range(p.K)]
        T = c / A[0]
        t = [-T, -T] + [-c / A[k - 2] for k in range(2, p.K + 1)]

        def split(values):
            hi = np.array([float(v) for v in values], dtype=float)
            lo = np.array([float(v - mpmath.mpf(h)) for v, h in zip(values, hi)], dtype=float)
            return hi, lo

        out = {}
        for name, seq in (("N", N), ("A", A), ("delta", delta), ("t_act", t[: p.K + 1])):
            out[name] = split(seq)
        out["T"] = split([T])
        return out


def build_ladder(params: LadderParams, mode=ValidationMode.ILLUSTRATIVE) -> Ladder:
    """Evaluate every derived sequence, validating parameters first.

    Raises ParameterOutOfRange naming the first violated inequality of the basic
    invariants or of ``mode``'s range constraints, and LadderOverflow when an
    ``N_k``, ``A_k`` or ``A_k**2`` is not representable.
    """
    p = params
    if p.precision not in PRECISIONS:
        raise ParameterOutOfRange(f"precision in {PRECISIONS}")
    if int(p.K) != p.K:
        raise ParameterOutOfRange("K integer")
    for name, margin, strict in _basic_checks(p):
        if not _holds(margin, strict):
            raise ParameterOutOfRange(name)
    for name, margin in _range_checks(p, mode):
        if not margin > 0:
            raise ParameterOutOfRange(name)

    k = np.arange(p.K + 1)
    log_N = np.log(p.N0) * np.power(float(p.b), k)
    log_A = p.beta * log_N
    for j in range(p.K + 1):
        for quantity, value in (("N_k", log_N[j]), ("A_k", log_A[j]), ("A_k**2", 2 * log_A[j]),
                                ("N_k**alpha", p.alpha * log_N[j])):
            if value >= _LOG_MAX:
                raise LadderOverflow(j, quantity)

    lo = {}
    if p.precision == "double":
        N = np.power(float(p.N0), np.power(float(p.b), k))
        A = np.power(N, p.beta)
        delta = np.power(N[:-1] / N[1:], 2 * p.alpha)
        T = p.c / A[0]
        t_act = np.empty(p.K + 1)
        t_act[:] = -T
        if p.K >= 3:
            t_act[3:] = -p.c / A[1:-2]
    else:
        seq = _high_precision_sequences(p)
        N, lo["N"] = seq["N"]
        A, lo["A"] = seq["A"]
        delta, lo["delta"] = seq["delta"]
        t_act, lo["t_act"] = seq["t_act"]
        T = float(seq["T"][0][0])
        lo["T"] = float(seq["T"][1][0])
    t_act[0] = -T
    for arr in (N, A, delta, t_act, log_N, log_A):
        arr.setflags(write=False)
    return Ladder(params=p, N=N, A=A, delta=delta, t_act=t_act, T=float(T),
                  log_N=log_N, log_A=log_A, lo=lo)


@dataclass
class ConstraintCheck:
    name: str
    passed: bool
    margin: float
    k: int | None = None
    group: str = "range"

    def to_dict(self):
        return asdict(self)


@dataclass
class ConstraintReport:
    mode: str
    epsilon: float
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def group(self, name):
        return [c for c in self.checks if c.group == name]

    def group_passed(self, name):
        return all(c.passed for c in self.group(name))

    def to_dict(self):
        return {
            "mode": self.mode,
            "epsilon": self.epsilon,
            "passed": self.passed,
            "checks": [c.to_dict() for c in self.checks],
        }


def _smallness_terms(ladder, include_viscous):
    """Log-values of the small quantities the barrier estimates rely on.

    Returns ``(name, k, log_value, log_threshold_offset)``; the (d) term is
    compared against 2 instead of epsilon, flagged by the offset ``None``.
    """
    p = ladder.params
    lA, lN, c, K = ladder.log_A, ladder.log_N, p.c, p.K
    log_delta = [2 * p.alpha * (lN[j] - lN[j + 1]) for j in range(K)]
    out = []
    for k in range(2, K):
        val = (log_delta[k] + 2 * lA[k + 1] - lA[k] - lA[k - 2]
               - c * math.exp(lA[k] - lA[k - 1]) + (c / 2) * math.exp(lA[k - 1] - lA[k - 2]))
        out.append(("(a) delta_k A_{k+1}^2/(A_k A_{k-2}) exp(-cA_k/A_{k-1} + (c/2)A_{k-1}/A_{k-2})", k, val))
    for k in range(0, K):
        out.append(("(b) delta_k A_{k+1}^2/A_k^2", k, log_delta[k] + 2 * lA[k + 1] - 2 * lA[k]))
    for k in range(3, K + 1):
        out.append(("(c) (A_{k-2}/A_0) exp(-(c/2)A_{k-2}/A_{k-3})", k,
                    lA[k - 2] - lA[0] - (c / 2) * math.exp(lA[k - 2] - lA[k - 3])))
    if include_viscous and K >= 1:
        val = (p.nu * c * math.exp(2 * lN[0] - lA[0])
               + math.log1p(4 * math.exp(log_delta[0] + 2 * lA[1] - 2 * lA[0])))
        out.append(("(d) exp(nu c N_0^2/A_0)(1 + 4 delta_0 A_1^2/A_0^2) <= 2", 0, val))
    return out


def validate_constraints(ladder: Ladder, mode=ValidationMode.STRICT_VISCOUS,
                         epsilon: float = 0.01) -> ConstraintReport:
    """Report every parameter constraint as data, with numeric margins.

    Margins are positive when a check passes.  Ratio and smallness margins are
    reported in natural-log units (``log threshold - log value``) because the
    quantities range over hundreds of orders of magnitude.
    """
    mode = ValidationMode(mode)
    p = ladder.params
    checks = [ConstraintCheck(name, margin > 0, float(margin), None, "range")
              for name, margin in _range_checks(p, mode)]
    if mode is ValidationMode.ILLUSTRATIVE:
        return ConstraintReport(mode.value, epsilon, checks)

    lA = ladder.log_A
    log_c100 = math.log(p.c / 100)
    for k in range(1, p.K):
        lhs = lA[k] - lA[k - 1]
        rhs = log_c100 + lA[k + 1] - lA[k]
        margin = rhs - lhs
        checks.append(ConstraintCheck("A_k/A_{k-1} <= (c/100) A_{k+1}/A_k", margin >= 0,
                                      float(margin), k, "ratio"))
    log_eps = math.log(epsilon)
    for name, k, val in _smallness_terms(ladder, mode is ValidationMode.STRICT_VISCOUS):
        threshold = math.log(2.0) if name.startswith("(d)") else log_eps
        margin = threshold - val
        checks.append(ConstraintCheck(name, margin >= 0, float(margin), k, "smallness"))
    return ConstraintReport(mode.value, epsilon, checks)
