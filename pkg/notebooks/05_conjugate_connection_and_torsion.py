# %% [markdown]
# # Product conjugate connection and torsion
# nabla^(S)_X Y = S(nabla~_X S Y). For S = DI it is metric, shares the curvature
# up to conjugation by S, and has torsion exactly when the base is curved.

# %%
import numpy as np

from tbgeo.almost_product import (conjugate_curvature, conjugate_curvature_direct, conjugate_metric_residual,
                                  conjugate_torsion, diagonal_identity, torsion_closed_form)
from tbgeo.bundle import TensorBundle
from tbgeo.cg_metric import CheegerGromoll, relative_residual
from tbgeo.manifold import builtin
from tbgeo.verify import random_draw

rng = np.random.default_rng(3)
for name in ("flat2", "sphere", "hyperbolic"):
    cg = CheegerGromoll(TensorBundle(builtin(name)))
    DI = diagonal_identity(cg.tb)
    d = random_draw(cg.tb, rng)
    print(name)
    print("  metric residual      ", f"{conjugate_metric_residual(cg, DI, d.q):.1e}")
    print("  curvature relation   ", f"{relative_residual(conjugate_curvature(cg, DI, d.q), conjugate_curvature_direct(cg, DI, d.q)):.1e}")
    for case, (U, W) in {"HH": d.H[:2], "HV": (d.H[0], d.V[0]), "VH": (d.V[0], d.H[0]), "VV": d.V[:2]}.items():
        T = conjugate_torsion(cg, DI, U, W, d.q)
        diff = relative_residual(T, torsion_closed_form(cg, U, W, d.q))
        print(f"  torsion {case}: |T| = {np.linalg.norm(T):.3e}, vs case list {diff:.1e}")
