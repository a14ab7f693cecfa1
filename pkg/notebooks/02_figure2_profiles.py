# %% [markdown]
# # Profiles approaching the terminal state
#
# Run the backward construction on the small-N0 ladder and compare the profiles
# `Y_k(t)` at a few times with the terminal profile `N_k^1.4`.

# %%
import numpy as np

from obukhov import build_ladder, figure2_params, integrate_backward_galerkin
from obukhov.cli import figure2_snapshot_times
from obukhov.svg import Plot

L = build_ladder(figure2_params(K=12))
traj = integrate_backward_galerkin(L)
times = figure2_snapshot_times(L)
Y = traj.interpolate(times) / L.N
print("snapshot times:", np.array2string(np.asarray(times), precision=4))

# %% [markdown]
# Ratio of each earlier profile to the terminal one.  The low modes sit above
# the terminal curve (mode 0 only decreases in time), then the ratio drops
# quickly with k.

# %%
ratio = Y[:-1] / Y[-1]
np.set_printoptions(precision=3, linewidth=120)
print(ratio)
print("largest ratio:", ratio.max())

# %%
plot = Plot(title="Y_k(t)", xlabel="N_k", ylabel="Y_k", xlog=True, ylog=True)
for t, row in zip(times[:-1], Y[:-1]):
    plot.add(L.N, row, label=f"t = {t:.3g}")
plot.add(L.N, Y[-1], label="t = 0", color="black", width=2.5)
plot.save("figure2_profiles.svg")
