# %% [markdown]
# Gauge independence of the expansion and the selector modification.

# %%
import numpy as np

from holonomy_lab import (dilate_loop, figure_eight, gauge_transform, holonomy, horizontal_lift,
                          make_heisenberg, random_polynomial_connection, selector_modify,
                          selector_residual, su2, taylor_functional)
from holonomy_lab.gauge import random_gauge
from holonomy_lab.liegroup import norm
from holonomy_lab.loops import DilationStructure

g = su2()
d = DilationStructure.euclidean(2)
c = random_polynomial_connection(2, g, 3)
loop = dilate_loop(figure_eight(1.0, 0.3), d, 0.25)

# %% the coefficients do not see gauges fixing the base point
F = taylor_functional(c, d, 3).evaluate(loop)
for seed in range(3):
    ct = gauge_transform(c, random_gauge(2, g, seed))
    print("F3 change under gauge", seed, float(norm(taylor_functional(ct, d, 3).evaluate(loop) - F)))

# %% on the Heisenberg group the modified connection has the same horizontal holonomy
m = make_heisenberg()
c3 = random_polynomial_connection(3, g, 3)
tilde, _ = selector_modify(c3, m)
pts = np.random.default_rng(0).uniform(-0.5, 0.5, (50, 3))
print("selector residual", selector_residual(tilde, m, pts))
lift = horizontal_lift(figure_eight(0.4, bend=0.3), m)
h = holonomy(c3, lift, steps=2000).group_value
ht = holonomy(tilde, lift, steps=2000).group_value
print("holonomy change", float(norm(h - ht)))
