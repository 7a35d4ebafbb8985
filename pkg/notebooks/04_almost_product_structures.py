# %% [markdown]
# # Almost product structures
# DI acts as +1 on horizontal and -1 on vertical lifts, J the other way round.
# The metric is pure for both; the Tachibana operator detects curvature of the base.

# %%
import itertools

import numpy as np

from tbgeo.almost_product import (diagonal_identity, nijenhuis, purity_defect, random_structure, structure_J,
                                  tachibana, w3_cyclic_sum)
from tbgeo.bundle import TensorBundle
from tbgeo.cg_metric import CheegerGromoll
from tbgeo.manifold import builtin
from tbgeo.verify import random_draw

rng = np.random.default_rng(2)
for name in ("flat2", "sphere"):
    cg = CheegerGromoll(TensorBundle(builtin(name)))
    DI, J, R = diagonal_identity(cg.tb), structure_J(cg.tb), random_structure(cg.tb, rng)
    d = random_draw(cg.tb, rng, constant_fields=True)
    lifts = d.H[:2] + d.V[:2]
    for S in (DI, J, R):
        worst = max(abs(purity_defect(cg, S, a, b, d.q)) for a in lifts for b in lifts)
        print(f"{name:7s} purity defect {S.tag:6s} {worst:.1e}")
    for kinds in itertools.product("HV", repeat=3):
        f = [(d.H if k == "H" else d.V)[i] for i, k in enumerate(kinds)]
        print(f"  Phi{''.join(kinds)} = {tachibana(cg, DI, *f, d.q): .3e}", end="")
    print()
    print("  W3 sums (Phi path, nabla path):", w3_cyclic_sum(cg, DI, d.H[0], d.V[0], d.H[1], d.q))
    print("  N(HX, HY) =", np.round(nijenhuis(cg, DI, d.H[0], d.H[1], d.q), 4))
