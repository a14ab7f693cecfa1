"""Numerical lab for the super-exponential Obukhov shell-model blow-up construction."""

from .errors import (AmplificationBudgetExceeded, ConfigParse, DimensionMismatch, FormMismatch,
                     LadderOverflow, NonFiniteState, ObukhovError, ParameterOutOfRange,
                     SpanMismatch, StepSizeCollapse)
from .ladder import (Ladder, LadderParams, ValidationMode, build_ladder, figure2_params,
                     validate_constraints)
from .model import (ForcingSpec, Form, ModelVariant, ShellState, convert, cutoff_vector,
                    recorded_force, rho, rhs_l2, rhs_linf, rhs_rescaled, rhs_variant)
from .integrator import (IntegratorConfig, Trajectory, galerkin_rhs, integrate,
                         integrate_backward_galerkin, roundtrip)
from .barriers import build_barriers, monitor_membership, verify_lemma_bounds
from .diagnostics import (besov_norm, blowup_indicator, energy, force_regularity,
                          galerkin_convergence, norm_report)

__version__ = "0.1.0"
