# %% [markdown]
# Convergence orders of the small-loop expansions.
#
# Each sweep shrinks a loop by the model dilations and fits the slope of
# log ||log Hol + F|| against log length.

# %%
from pathlib import Path

from holonomy_lab import SweepConfig, load_config, run_sweep

here = Path(__file__).parent

# %% Euclidean plane: bare holonomy against the order-3 functional
for expansion, m in (("none", 2), ("F3", 4)):
    cfg = SweepConfig(model="euclidean:2", connection={"preset": "random", "seed": 3},
                      loop={"family": "figure-eight", "skew": 0.3}, expansion=expansion,
                      declared_m=m)
    rep = run_sweep(cfg)
    print(f"euclidean {expansion:>4}: order {rep.fitted_order:.3f} ({rep.verdict})")

# %% Heisenberg group with the selector-modified functional
rep = run_sweep(load_config(here / "heisenberg_f5.toml"))
print(f"heisenberg selector-F5: order {rep.fitted_order:.3f} ({rep.verdict})")
print(rep.to_csv())
