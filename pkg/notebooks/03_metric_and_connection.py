# %% [markdown]
# # The Cheeger-Gromoll type metric and its Levi-Civita connection
# The fiber block is (1/alpha)(g_ik g^jl + T^j_i T^l_k) with alpha = 1 + |t|^2.
# The closed-form connection on lifts is compared with Christoffel symbols
# computed directly from the 6x6 metric.

# %%
import numpy as np

from tbgeo.bundle import TensorBundle
from tbgeo.cg_metric import CheegerGromoll, relative_residual
from tbgeo.manifold import builtin
from tbgeo.verify import random_draw

cg = CheegerGromoll(TensorBundle(builtin("flat2")))
m = cg.metric_at(cg.tb.point([0, 0], np.eye(2)))
print("alpha =", m.alpha)
print(np.round(m.adapted, 4))

# %%
cg = CheegerGromoll(TensorBundle(builtin("sphere")))
rng = np.random.default_rng(1)
for _ in range(3):
    d = random_draw(cg.tb, rng)
    for name, (U, W) in {"HH": d.H[:2], "HV": (d.H[0], d.V[0]), "VH": (d.V[0], d.H[0]), "VV": d.V[:2]}.items():
        r = relative_residual(cg.nabla_closed(U, W, d.q), cg.nabla_oracle(U, W, d.q))
        print(name, f"{r:.1e}", end="  ")
    print()

# %% [markdown]
# Several index placements of the curvature term in the mixed cases are
# plausible when written out by hand. Only one survives the oracle.

# %%
d = random_draw(cg.tb, rng)
for name, res in cg.reading_residuals([(d.q, d.H[0], d.V[0])]).items():
    print(f"{name:14s} {res:.2e}")

# %% [markdown]
# The bundle over the flat plane is not flat.

# %%
flat = CheegerGromoll(TensorBundle(builtin("flat2")))
print("max |R| at t=I:", np.abs(flat.curvature_numeric(flat.tb.point([0, 0], np.eye(2)))).max())
