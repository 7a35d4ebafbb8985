# %% [markdown]
# # Lifts and brackets on the (1,1)-tensor bundle
# Points are (x, t) with t a 2x2 matrix; the bundle has dimension 6.
# Horizontal lifts of base fields pick up a fiber part driven by the connection,
# vertical lifts sit in the fiber.

# %%
import math

import numpy as np

from tbgeo import expr as ex
from tbgeo.bundle import HorizontalLift, TensorBundle, VerticalLift
from tbgeo.manifold import builtin

tb = TensorBundle(builtin("sphere"))
q = tb.point([math.pi / 4, 0.3], np.array([[0.0, 1.0], [0.0, 0.0]]))
print("coords:", tb.coords)
print("H(d_th) =", tb.horizontal_lift([1, 0], q))
print("H(d_ph) =", tb.horizontal_lift([0, 1], q))
print("V(I)    =", tb.vertical_lift(np.eye(2), q))

# %% [markdown]
# The bracket of two horizontal lifts is H[X,Y] plus a vertical curvature term
# V(t rho - rho t), rho = R(X,Y). Closed form and coordinate commutator agree.

# %%
one, zero = ex.ONE, ex.ZERO
U, W = HorizontalLift((one, zero)), HorizontalLift((zero, one))
print("closed   ", tb.bracket_closed(U, W, q))
print("numeric  ", tb.bracket_numeric(U, W, q))

th = ex.var("th")
A = VerticalLift(((ex.func("sin", th), zero), (zero, th)))
print("[H d_th, V A] closed  ", tb.bracket_closed(U, A, q))
print("[H d_th, V A] numeric ", tb.bracket_numeric(U, A, q))

# %% [markdown]
# At t = I the curvature term drops out, since the identity commutes with rho.

# %%
qI = tb.point([math.pi / 4, 0.3], np.eye(2))
print(tb.curvature_lift([1, 0], [0, 1], qI))
