"""Error-free transformations for the compensated (double-double) mode.

Only the two primitives the package needs are provided: Knuth's two-sum and
a compensated accumulator for repeated ``y += dy`` updates.  Both operate
elementwise on numpy arrays.
"""

import numpy as np


def two_sum(a, b):
    """Return ``(s, e)`` with ``s = fl(a + b)`` and ``a + b = s + e`` exactly."""
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


class CompensatedState:
    """A vector stored as an unevaluated sum ``hi + lo`` of two doubles."""

    __slots__ = ("hi", "lo")

    def __init__(self, hi, lo=None):
        self.hi = np.array(hi, dtype=float)
        self.lo = np.zeros_like(self.hi) if lo is None else np.array(lo, dtype=float)

    def add(self, increment):
        """Return ``self + increment`` with the rounding error carried in ``lo``."""
        s, e = two_sum(self.hi, increment)
        lo = self.lo + e
        hi, lo = two_sum(s, lo)
        return CompensatedState(hi, lo)

    def value(self):
        return self.hi + self.lo

    def copy(self):
        return CompensatedState(self.hi.copy(), self.lo.copy())
