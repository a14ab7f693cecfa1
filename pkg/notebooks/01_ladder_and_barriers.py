# %% [markdown]
# # Ladder, barriers and the trapping box
#
# Build a super-exponential frequency ladder, look at the activation times,
# then construct the upper and lower barriers and check that backward
# solutions from the blow-up profile stay between them.

# %%
import numpy as np

from obukhov import (ValidationMode, build_barriers, build_ladder, galerkin_rhs,
                     integrate_backward_galerkin, monitor_membership, validate_constraints,
                     verify_lemma_bounds)
from obukhov.cli import STRICT_PARAMS

L = build_ladder(STRICT_PARAMS, ValidationMode.STRICT_VISCOUS)
print("N_k   ", np.array2string(L.N, precision=3))
print("A_k   ", np.array2string(L.A, precision=3))
print("t_k   ", np.array2string(L.t_act, precision=3))
print("T     ", L.T)

# %% [markdown]
# The constraint report lists each inequality with its margin.  This set passes
# the range checks but not every sufficient smallness condition; the bounds
# below hold numerically anyway.

# %%
for row in validate_constraints(L, ValidationMode.STRICT_VISCOUS).to_dict()["checks"]:
    print(row)

# %%
env = build_barriers(L)
report = verify_lemma_bounds(env, grid=512)
for name, check in report.checks.items():
    print(f"{name:20s} passed={check.passed} worst margin={check.worst_margin:.3g}")

# %% [markdown]
# Backward runs in both modes, checked against the box at every stored step.

# %%
for mode in ("inviscid", "viscous-masked"):
    traj = integrate_backward_galerkin(L, mode=mode)
    log = monitor_membership(traj, env, rhs=galerkin_rhs(L, mode))
    print(mode, "escaped:", log.escaped, "min margin / A_k:", log.normalized_worst(L.A).min())
