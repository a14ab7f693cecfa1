# %% [markdown]
# # Model variants and truncation level
#
# A single low mode in the nearest-neighbour model with the low-low-high
# pairing pushes energy upward one mode at a time.  The backward construction
# does the opposite: every mode starts near its terminal size.  Then the
# truncation study shows how the low modes depend on the number of modes kept.

# %%
import numpy as np

from obukhov import figure2_params, galerkin_convergence
from obukhov.cli import ScenarioConfig, run

report = run(ScenarioConfig.for_scenario("variant-compare", out="variant-compare", plots=False), force=True)
for name, entry in report.results["arrivals"].items():
    print(f"{name:20s} cascade={entry['cascade']}",
          np.array2string(np.asarray(entry["arrival_times"]), precision=3))

# %% [markdown]
# Sup-in-time differences of modes 0..4 between consecutive truncation levels,
# relative to A_k.  They shrink with K but stay well above 1e-6.

# %%
gal = galerkin_convergence(figure2_params(), [8, 10, 12], workers=3)
for pair, rel in gal.relative.items():
    print(pair, np.array2string(rel, precision=3))
