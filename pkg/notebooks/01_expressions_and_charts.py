# %% [markdown]
# # Expressions and base charts
# Metrics are written as strings, parsed into expression trees and
# differentiated exactly. Christoffel symbols and curvature come from there.

# %%
import math

import numpy as np

from tbgeo import expr as ex
from tbgeo.manifold import builtin, christoffel, curvature, sample_points, sectional_curvature

e = ex.parse("sin(th)^2")
print(ex.render(e), "->", ex.render(ex.differentiate(e, "th")))
print(ex.evaluate(e, {"th": math.pi / 4}))

# %% [markdown]
# Syntax errors carry the byte offset.

# %%
try:
    ex.parse("th+")
except ex.ParseError as err:
    print(err, err.offset)

# %% [markdown]
# ## Unit sphere
# At th = pi/4 the symbols Gamma^th_{ph ph} and Gamma^ph_{th ph} are -1/2 and 1.

# %%
sphere = builtin("sphere")
G = christoffel(sphere).at([math.pi / 4, 0.0])
print("Gamma^th_ph,ph =", G[0, 1, 1], " Gamma^ph_th,ph =", G[1, 0, 1])

rng = np.random.default_rng(0)
for name in ("sphere", "hyperbolic", "flat2"):
    chart = builtin(name)
    K = [sectional_curvature(chart, p) for p in sample_points(chart, 5, rng)]
    print(f"{name:10s} K = {np.round(K, 12)}")

# %%
print("max |R| on flat2:", np.abs(curvature(builtin("flat2")).at([0.1, 0.2])).max())
