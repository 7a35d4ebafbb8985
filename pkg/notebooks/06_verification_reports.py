# %% [markdown]
# # Verification reports
# Every suite is also reachable from the command line, e.g.
# `tbgeo verify --manifold builtin:sphere --suite torsion --report out.json`.

# %%
from tbgeo.manifold import builtin
from tbgeo.verify import run_suite

rep = run_suite(builtin("hyperbolic"), "tachibana", samples=10, seed=1)
for c in rep.checks:
    print("PASS" if c.passed else "FAIL", f"{c.residual:.2e} {c.comparison} {c.tolerance:.0e}", c.name)
print(rep.to_json()[:400])
