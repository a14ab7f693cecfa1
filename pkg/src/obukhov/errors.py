"""Exception hierarchy shared by every module of the package."""


class ObukhovError(Exception):
    """Base class for all errors raised by this package."""


class ParameterOutOfRange(ObukhovError, ValueError):
    """A ladder parameter violates one of its admissible ranges."""

    def __init__(self, inequality, message=None):
        self.inequality = inequality
        super().__init__(message or f"parameter constraint violated: {inequality}")


class LadderOverflow(ObukhovError, OverflowError):
    """A frequency or amplitude is not representable in double precision."""

    def __init__(self, k, quantity):
        self.k = k
        self.quantity = quantity
        super().__init__(f"{quantity} overflows at k={k}")


class DimensionMismatch(ObukhovError, ValueError):
    pass


class FormMismatch(ObukhovError, ValueError):
    pass


class SpanMismatch(ObukhovError, ValueError):
    pass


class StepSizeCollapse(ObukhovError, RuntimeError):
    """The adaptive step fell below the admissible minimum.

    In forward runs this is the blow-up signal; ``t`` is the last time reached
    and ``trajectory`` holds everything computed up to that point.
    """

    def __init__(self, t, step, trajectory=None):
        self.t = t
        self.step = step
        self.trajectory = trajectory
        super().__init__(f"step size collapsed to {step:.3e} at t={t!r}")


class NonFiniteState(ObukhovError, FloatingPointError):
    def __init__(self, t, trajectory=None):
        self.t = t
        self.trajectory = trajectory
        super().__init__(f"non-finite state encountered at t={t!r}")


class AmplificationBudgetExceeded(ObukhovError, RuntimeError):
    """Backward anti-dissipation would amplify step errors past the budget."""

    def __init__(self, k, amplification, budget):
        self.k = k
        self.amplification = amplification
        self.budget = budget
        super().__init__(
            f"mode {k}: predicted backward amplification {amplification:.3e} "
            f"exceeds budget {budget:.3e} (pass force=True to run anyway)"
        )


class ConfigParse(ObukhovError, ValueError):
    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)
