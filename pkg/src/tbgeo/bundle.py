"""The (1,1)-tensor bundle over a chart: points, lifts, adapted frame, brackets.

Natural coordinates on the bundle are ``(x^0..x^{n-1}, t^i_j)`` with the
fiber coordinate t^i_j stored in slot ``n + i*n + j``.  Tangent vectors at a
point are plain float arrays of length ``N = n + n*n`` in that order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence, Union

import numpy as np

from . import expr as ex
from .expr import Expr
from .manifold import ManifoldChart, christoffel, covariant_derivative_11, curvature

__all__ = [
    "BundlePoint", "TensorBundle", "HorizontalLift", "VerticalLift", "BundleField",
    "fiber_slot", "base_slot", "bundle_dim", "BracketKindError",
]


def bundle_dim(n: int) -> int:
    return n + n * n


def base_slot(j: int) -> int:
    return j


def fiber_slot(n: int, i: int, j: int) -> int:
    """Slot of d/dt^i_j in natural coordinates."""
    return n + i * n + j


class BracketKindError(TypeError):
    """Closed-form formulas exist only for pairs of pure lifts."""


@dataclass(frozen=True)
class BundlePoint:
    x: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float).reshape(-1)
        n = x.size
        t = np.asarray(self.t, dtype=float)
        if t.shape != (n, n):
            raise ValueError(f"fiber components must be {n}x{n}, got shape {t.shape}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def coords(self) -> np.ndarray:
        return np.concatenate([self.x, self.t.reshape(-1)])


@dataclass(frozen=True, eq=False)
class HorizontalLift:
    """Horizontal lift of a base vector field ``X`` (``X[j]`` = X^j as expressions)."""

    X: tuple

    def __post_init__(self):
        object.__setattr__(self, "X", tuple(ex.as_expr(c) for c in self.X))

    def scaled(self, c: float) -> "HorizontalLift":
        return HorizontalLift(tuple(ex.mul(c, e) for e in self.X))


@dataclass(frozen=True, eq=False)
class VerticalLift:
    """Vertical lift of a (1,1) field ``A`` (``A[i][j]`` = A^i_j as expressions)."""

    A: tuple

    def __post_init__(self):
        object.__setattr__(self, "A", tuple(tuple(ex.as_expr(c) for c in row) for row in self.A))

    def scaled(self, c: float) -> "VerticalLift":
        return VerticalLift(tuple(tuple(ex.mul(c, e) for e in row) for row in self.A))


@dataclass(frozen=True, eq=False)
class BundleField:
    """Arbitrary vector field on the bundle in natural coordinates."""

    components: tuple

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(ex.as_expr(c) for c in self.components))


Field = Union[HorizontalLift, VerticalLift, BundleField]


class TensorBundle:
    """T^1_1(M) over one chart, with Expr-level and point-level machinery."""

    def __init__(self, chart: ManifoldChart):
        self.chart = chart
        self.n = n = chart.dim
        self.N = bundle_dim(n)
        self.x_names = tuple(chart.coords)
        self.t_names = tuple(f"t_{i}_{j}" for i in range(n) for j in range(n))
        clash = set(self.x_names) & set(self.t_names)
        if clash:
            raise ValueError(f"chart coordinates clash with fiber names: {sorted(clash)}")
        self.coords = self.x_names + self.t_names
        self.t_sym = tuple(tuple(ex.Var(f"t_{i}_{j}") for j in range(n)) for i in range(n))
        self.christoffel = christoffel(chart)
        self.curvature = curvature(chart)

    # -- points ---------------------------------------------------------------

    def point(self, x: Sequence[float], t=None) -> BundlePoint:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"base point must have {self.n} coordinates")
        t = np.zeros((self.n, self.n)) if t is None else t
        return BundlePoint(x, t)

    def binding(self, q: BundlePoint) -> dict[str, float]:
        return dict(zip(self.coords, q.coords))

    def _check(self, q: BundlePoint) -> None:
        if q.n != self.n:
            raise ValueError(f"point has base dimension {q.n}, bundle has {self.n}")

    # -- the connection data on the fiber -------------------------------------

    @cached_property
    def gamma_hat(self) -> tuple:
        """``gamma_hat[s][i][j]`` = Gamma^m_{sj} t^i_m - Gamma^i_{sm} t^m_j (vertical part of H d_s)."""
        n, G, t = self.n, self.christoffel.components, self.t_sym
        return tuple(tuple(tuple(
            ex.add(*(G[m][s][j] * t[i][m] - G[i][s][m] * t[m][j] for m in range(n)))
            for j in range(n)) for i in range(n)) for s in range(n))

    def gamma_hat_at(self, q: BundlePoint) -> np.ndarray:
        """Numeric Gamma-hat as an ``(n, n, n)`` array indexed ``[s, i, j]``."""
        G = self.christoffel.at(q.x)
        t = q.t
        return np.einsum("msj,im->sij", G, t) - np.einsum("ism,mj->sij", G, t)

    @cached_property
    def frame_exprs(self) -> tuple:
        """Adapted frame as an N x N expression matrix (columns H_s, then d/dt^i_j)."""
        n, N = self.n, self.N
        F = [[ex.ONE if a == b else ex.ZERO for b in range(N)] for a in range(N)]
        for s in range(n):
            for i in range(n):
                for j in range(n):
                    F[fiber_slot(n, i, j)][s] = self.gamma_hat[s][i][j]
        return tuple(tuple(r) for r in F)

    @cached_property
    def frame_inverse_exprs(self) -> tuple:
        n, N = self.n, self.N
        F = [[ex.ONE if a == b else ex.ZERO for b in range(N)] for a in range(N)]
        for s in range(n):
            for i in range(n):
                for j in range(n):
                    F[fiber_slot(n, i, j)][s] = -self.gamma_hat[s][i][j]
        return tuple(tuple(r) for r in F)

    def frame(self, q: BundlePoint) -> np.ndarray:
        """Adapted frame matrix F at ``q``; column k is the k-th frame vector."""
        self._check(q)
        n = self.n
        F = np.eye(self.N)
        F[n:, :n] = self.gamma_hat_at(q).reshape(n, n * n).T
        return F

    def frame_inverse(self, q: BundlePoint) -> np.ndarray:
        """Closed block form [[I, 0], [-Gamma_hat, I]]."""
        n = self.n
        Fi = np.eye(self.N)
        Fi[n:, :n] = -self.gamma_hat_at(q).reshape(n, n * n).T
        return Fi

    def split(self, v: np.ndarray, q: BundlePoint) -> tuple[np.ndarray, np.ndarray]:
        """Adapted components of ``v``: (horizontal base vector, vertical n x n matrix)."""
        w = self.frame_inverse(q) @ v
        return w[: self.n], w[self.n:].reshape(self.n, self.n)

    # -- lifts at a point -------------------------------------------------------

    def vertical_lift(self, A, q: BundlePoint) -> np.ndarray:
        self._check(q)
        A = np.asarray(A, dtype=float)
        if A.shape != (self.n, self.n):
            raise ValueError(f"(1,1) tensor must be {self.n}x{self.n}, got {A.shape}")
        return np.concatenate([np.zeros(self.n), A.reshape(-1)])

    def horizontal_lift(self, X, q: BundlePoint) -> np.ndarray:
        self._check(q)
        X = np.asarray(X, dtype=float)
        if X.shape != (self.n,):
            raise ValueError(f"vector must have {self.n} components, got {X.shape}")
        vert = np.einsum("s,sij->ij", X, self.gamma_hat_at(q))
        return np.concatenate([X, vert.reshape(-1)])

    def gamma_ops(self, phi, q: BundlePoint) -> tuple[np.ndarray, np.ndarray]:
        """(gamma phi, gamma-tilde phi): vertical slots t^m_j phi^i_m and t^i_m phi^m_j."""
        self._check(q)
        phi = np.asarray(phi, dtype=float)
        if phi.shape != (self.n, self.n):
            raise ValueError(f"(1,1) tensor must be {self.n}x{self.n}")
        return self.vertical_lift(phi @ q.t, q), self.vertical_lift(q.t @ phi, q)

    def curvature_lift(self, X, Y, q: BundlePoint) -> np.ndarray:
        """(gamma-tilde - gamma) R(X, Y) at ``q`` for base vectors ``X``, ``Y``."""
        rho = np.einsum("mklj,k,l->mj", self.curvature.at(q.x), X, Y)
        gp, gtp = self.gamma_ops(rho, q)
        return gtp - gp

    # -- fields -----------------------------------------------------------------

    def field(self, f: Field) -> tuple[Expr, ...]:
        """Natural-coordinate expression components of a lifted or generic field."""
        n = self.n
        if isinstance(f, BundleField):
            if len(f.components) != self.N:
                raise ValueError(f"bundle field needs {self.N} components")
            return f.components
        if isinstance(f, VerticalLift):
            self._check_tensor(f.A)
            return (ex.ZERO,) * n + tuple(f.A[i][j] for i in range(n) for j in range(n))
        if isinstance(f, HorizontalLift):
            self._check_vector(f.X)
            gh = self.gamma_hat
            vert = tuple(ex.add(*(f.X[s] * gh[s][i][j] for s in range(n)))
                         for i in range(n) for j in range(n))
            return tuple(f.X) + vert
        raise TypeError(f"not a bundle field: {f!r}")

    def _check_vector(self, X) -> None:
        if len(X) != self.n:
            raise ValueError(f"base vector field needs {self.n} components")

    def _check_tensor(self, A) -> None:
        if len(A) != self.n or any(len(r) != self.n for r in A):
            raise ValueError(f"(1,1) field must be {self.n}x{self.n}")

    def base_values(self, exprs, q: BundlePoint) -> np.ndarray:
        return np.array(ex.evaluate_many(exprs, dict(zip(self.x_names, q.x))))

    def at(self, f: Field, q: BundlePoint) -> np.ndarray:
        """Value of a field at ``q`` as a tangent vector."""
        return np.array(ex.evaluate_many(self.field(f), self.binding(q)))

    def jet(self, f: Field, q: BundlePoint) -> tuple[np.ndarray, np.ndarray]:
        """Value ``v`` and Jacobian ``J[K, L] = d_L v^K`` of a field at ``q``."""
        comps = self.field(f)
        derivs = [ex.differentiate(c, name) for c in comps for name in self.coords]
        vals = ex.evaluate_many(list(comps) + derivs, self.binding(q))
        N = self.N
        return np.array(vals[:N]), np.array(vals[N:]).reshape(N, N)

    # -- brackets ---------------------------------------------------------------

    def base_bracket(self, X: Sequence[Expr], Y: Sequence[Expr]) -> tuple[Expr, ...]:
        n, x = self.n, self.x_names
        d = ex.differentiate
        return tuple(ex.add(*(X[k] * d(Y[h], x[k]) - Y[k] * d(X[h], x[k]) for k in range(n)))
                     for h in range(n))

    def covariant_along(self, X: Sequence[Expr], A) -> tuple:
        """(nabla_X A)^i_j as expressions."""
        n = self.n
        dA = covariant_derivative_11(self.chart, A)
        return tuple(tuple(ex.add(*(X[k] * dA[k][i][j] for k in range(n))) for j in range(n))
                     for i in range(n))

    def bracket_closed(self, U: Field, W: Field, q: BundlePoint) -> np.ndarray:
        """Lie bracket of two pure lifts from the lift identities.

        [H X, H Y] = H[X, Y] + (gamma-tilde - gamma) R(X, Y),
        [H X, V A] = V(nabla_X A),  [V A, V B] = 0.
        """
        self._check(q)
        if isinstance(U, HorizontalLift) and isinstance(W, HorizontalLift):
            XY = self.base_values(self.base_bracket(U.X, W.X), q)
            X, Y = self.base_values(U.X, q), self.base_values(W.X, q)
            return self.horizontal_lift(XY, q) + self.curvature_lift(X, Y, q)
        if isinstance(U, HorizontalLift) and isinstance(W, VerticalLift):
            return self._nabla_lift(U.X, W.A, q)
        if isinstance(U, VerticalLift) and isinstance(W, HorizontalLift):
            return -self._nabla_lift(W.X, U.A, q)
        if isinstance(U, VerticalLift) and isinstance(W, VerticalLift):
            return np.zeros(self.N)
        raise BracketKindError(f"no closed form for [{type(U).__name__}, {type(W).__name__}]")

    def _nabla_lift(self, X, A, q: BundlePoint) -> np.ndarray:
        n = self.n
        flat = [e for row in self.covariant_along(X, A) for e in row]
        return self.vertical_lift(self.base_values(flat, q).reshape(n, n), q)

    def bracket_field(self, U: Field, W: Field) -> BundleField:
        """[U, W]^K = U^L d_L W^K - W^L d_L U^K as an expression field."""
        u, w = self.field(U), self.field(W)
        d = ex.differentiate
        comps = []
        for K in range(self.N):
            terms = []
            for L, name in enumerate(self.coords):
                terms.append(u[L] * d(w[K], name))
                terms.append(-(w[L] * d(u[K], name)))
            comps.append(ex.add(*terms))
        return BundleField(tuple(comps))

    def bracket_numeric(self, U: Field, W: Field, q: BundlePoint) -> np.ndarray:
        self._check(q)
        return self.at(self.bracket_field(U, W), q)


def bracket_from_jets(u, Ju, w, Jw) -> np.ndarray:
    """[U, W] at a point from values and Jacobians of both fields."""
    return Jw @ u - Ju @ w
