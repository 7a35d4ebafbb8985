"""Almost product structures on T^1_1(M) and the geometry built from them.

A structure is stored as a constant matrix acting on adapted-frame
components; its natural-coordinate form F S F^{-1} varies with the point.
Everything that needs derivatives (Lie derivatives, the Tachibana operator,
the conjugate connection) works from values and Jacobians of fields at a
point, so results are exact up to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import expr as ex
from .bundle import (BundleField, BundlePoint, Field, HorizontalLift, TensorBundle,
                     VerticalLift, bracket_from_jets)
from .cg_metric import CheegerGromoll, curvature_from_jet

__all__ = [
    "ProductStructure", "diagonal_identity", "structure_J", "random_structure",
    "diag_lift_apply", "purity_defect", "tachibana", "tachibana_closed",
    "nijenhuis", "w3_cyclic_sum", "conjugate_connection", "conjugate_closed_form",
    "conjugate_coefficients", "conjugate_curvature", "conjugate_curvature_direct",
    "conjugate_metric_residual", "conjugate_torsion", "torsion_closed_form",
    "torsion_tensor",
]


@dataclass(frozen=True, eq=False)
class ProductStructure:
    """A (1,1) tensor on the bundle given by a constant adapted-frame matrix."""

    tag: str
    bundle: TensorBundle
    adapted: np.ndarray = field(repr=False)

    def __post_init__(self):
        S = np.asarray(self.adapted, dtype=float)
        N = self.bundle.N
        if S.shape != (N, N):
            raise ValueError(f"structure must be {N}x{N}")
        object.__setattr__(self, "adapted", S)

    @property
    def is_involution(self) -> bool:
        return bool(np.allclose(self.adapted @ self.adapted, np.eye(self.bundle.N), atol=1e-12))

    def natural_at(self, q: BundlePoint) -> np.ndarray:
        tb = self.bundle
        return tb.frame(q) @ self.adapted @ tb.frame_inverse(q)

    def apply(self, v: np.ndarray, q: BundlePoint) -> np.ndarray:
        return self.natural_at(q) @ v

    @cached_property
    def natural_exprs(self) -> tuple:
        tb = self.bundle
        N = tb.N
        F, Fi, S = tb.frame_exprs, tb.frame_inverse_exprs, self.adapted
        FS = [[ex.add(*(F[a][c] * S[c, b] for c in range(N) if S[c, b] != 0.0 and F[a][c] is not ex.ZERO))
               for b in range(N)] for a in range(N)]
        return tuple(tuple(ex.add(*(FS[a][c] * Fi[c][b] for c in range(N)
                                   if FS[a][c] is not ex.ZERO and Fi[c][b] is not ex.ZERO))
                           for b in range(N)) for a in range(N))

    @cached_property
    def _jet_fn(self):
        tb = self.bundle
        flat = [e for row in self.natural_exprs for e in row]
        d1 = [ex.differentiate(e, p) for p in tb.coords for e in flat]
        return ex.compile_exprs(flat + d1, tb.coords)

    @cached_property
    def _jet2_fn(self):
        tb = self.bundle
        flat = [e for row in self.natural_exprs for e in row]
        d2 = [ex.differentiate(ex.differentiate(e, p), r) for p in tb.coords for r in tb.coords for e in flat]
        return ex.compile_exprs(d2, tb.coords)

    def jet(self, q: BundlePoint) -> tuple[np.ndarray, np.ndarray]:
        """S[K, L] and dS[P, K, L] = d_P S^K_L in natural coordinates."""
        N = self.bundle.N
        vals = self._jet_fn(q.coords)
        return vals[: N * N].reshape(N, N), vals[N * N:].reshape(N, N, N)

    def second_derivative(self, q: BundlePoint) -> np.ndarray:
        N = self.bundle.N
        return self._jet2_fn(q.coords).reshape(N, N, N, N)

    def apply_jet(self, f: Field, q: BundlePoint) -> tuple[np.ndarray, np.ndarray]:
        """Value and Jacobian of the field S f."""
        w, Jw = self.bundle.jet(f, q)
        S, dS = self.jet(q)
        return S @ w, np.einsum("pkl,l->kp", dS, w) + S @ Jw

    def apply_lift(self, f: Field) -> Field:
        """S applied to a pure lift, for structures diagonal on the lift splitting."""
        n = self.bundle.n
        h = np.diag(self.adapted)[:n]
        v = np.diag(self.adapted)[n:]
        diagonal = np.count_nonzero(self.adapted - np.diag(np.diag(self.adapted))) == 0
        if not diagonal or len(set(h)) != 1 or len(set(v)) != 1:
            raise TypeError(f"structure {self.tag} does not map lifts to lifts")
        if isinstance(f, HorizontalLift):
            return f.scaled(h[0])
        if isinstance(f, VerticalLift):
            return f.scaled(v[0])
        raise TypeError("apply_lift needs a pure lift")


def diagonal_identity(tb: TensorBundle) -> ProductStructure:
    """D I: +1 on horizontal lifts, -1 on vertical lifts."""
    n = tb.n
    return ProductStructure("DI", tb, np.diag([1.0] * n + [-1.0] * (n * n)))


def structure_J(tb: TensorBundle) -> ProductStructure:
    """J: -1 on horizontal lifts, +1 on vertical lifts."""
    n = tb.n
    return ProductStructure("J", tb, np.diag([-1.0] * n + [1.0] * (n * n)))


def random_structure(tb: TensorBundle, rng: np.random.Generator) -> ProductStructure:
    """A generic involution P D P^{-1} mixing horizontal and vertical directions."""
    N = tb.N
    P = np.eye(N) + 0.5 * rng.standard_normal((N, N))
    D = np.diag([1.0] * tb.n + [-1.0] * (N - tb.n))
    return ProductStructure("random", tb, P @ D @ np.linalg.inv(P))


def diag_lift_apply(tb: TensorBundle, gamma, f: Field, q: BundlePoint) -> np.ndarray:
    """D gamma on a pure lift:  H X -> H(gamma X),  V A -> -V(gamma A).

    ``gamma`` is an n x n array of expressions (or numbers), gamma[i][j] = gamma^i_j.
    The composition A o gamma is taken with components gamma^i_m A^m_j.
    """
    n = tb.n
    gam = tb.base_values([ex.as_expr(e) for row in gamma for e in row], q).reshape(n, n)
    if isinstance(f, HorizontalLift):
        return tb.horizontal_lift(gam @ tb.base_values(f.X, q), q)
    if isinstance(f, VerticalLift):
        A = tb.base_values([e for row in f.A for e in row], q).reshape(n, n)
        return -tb.vertical_lift(gam @ A, q)
    raise TypeError("diagonal lifts act on pure lifts only")


def _vec(tb: TensorBundle, v, q: BundlePoint) -> np.ndarray:
    return tb.at(v, q) if isinstance(v, (HorizontalLift, VerticalLift, BundleField)) else np.asarray(v, float)


def purity_defect(cg: CheegerGromoll, S: ProductStructure, v1, v2, q: BundlePoint) -> float:
    """g(S v1, v2) - g(v1, S v2)."""
    tb = cg.tb
    a, b = _vec(tb, v1, q), _vec(tb, v2, q)
    G = cg.metric_at(q).natural
    Sn = S.natural_at(q)
    return float((Sn @ a) @ G @ b - a @ G @ (Sn @ b))


def tachibana(cg: CheegerGromoll, S: ProductStructure, X: Field, Y: Field, Z: Field, q: BundlePoint) -> float:
    """(Phi_S g)(X, Y, Z) = (SX)(g(Y,Z)) - X(g(SY,Z)) + g((L_Y S)X, Z) + g(Y, (L_Z S)X).

    Lie derivatives use (L_Y S)X = [Y, SX] - S[Y, X] with brackets from field jets.
    """
    tb = cg.tb
    G, dG = cg.natural_matrix(q), cg.natural_derivative(q)
    Sm, _ = S.jet(q)
    x, Jx = tb.jet(X, q)
    y, Jy = tb.jet(Y, q)
    z, Jz = tb.jet(Z, q)
    sx, Jsx = S.apply_jet(X, q)
    sy, Jsy = S.apply_jet(Y, q)

    def directional(u, a, Ja, b, Jb):
        return np.einsum("p,pij,i,j->", u, dG, a, b) + (Ja @ u) @ G @ b + a @ G @ (Jb @ u)

    def lie(w, Jw):  # (L_W S) X
        return bracket_from_jets(w, Jw, sx, Jsx) - Sm @ bracket_from_jets(w, Jw, x, Jx)

    return float(directional(sx, y, Jy, z, Jz) - directional(x, sy, Jsy, z, Jz)
                 + lie(y, Jy) @ G @ z + y @ G @ lie(z, Jz))


def tachibana_closed(cg: CheegerGromoll, X: Field, Y: Field, Z: Field, q: BundlePoint) -> float:
    """Case table for D I:  (H,V,H) -> 2 g(VB, (g~-g)R(Z,X)),  (H,H,V) -> 2 g((g~-g)R(Y,X), VC), else 0."""
    tb = cg.tb
    kinds = "".join("H" if isinstance(f, HorizontalLift) else "V" for f in (X, Y, Z))
    if kinds == "HVH":
        Xv, Zv = tb.base_values(X.X, q), tb.base_values(Z.X, q)
        return 2.0 * cg.inner(tb.at(Y, q), tb.curvature_lift(Zv, Xv, q), q)
    if kinds == "HHV":
        Xv, Yv = tb.base_values(X.X, q), tb.base_values(Y.X, q)
        return 2.0 * cg.inner(tb.curvature_lift(Yv, Xv, q), tb.at(Z, q), q)
    return 0.0


def nijenhuis(cg: CheegerGromoll, S: ProductStructure, U: Field, W: Field, q: BundlePoint,
              method: str = "closed") -> np.ndarray:
    """N_S(U, W) = [SU, SW] - S[SU, W] - S[U, SW] + [U, W].

    ``method="closed"`` uses the lift bracket identities (S must map lifts to
    lifts); ``"numeric"`` uses brackets of field jets and works for any S.
    """
    tb = cg.tb
    Sm = S.natural_at(q)
    if method == "closed":
        SU, SW = S.apply_lift(U), S.apply_lift(W)
        br = tb.bracket_closed
        return br(SU, SW, q) - Sm @ br(SU, W, q) - Sm @ br(U, SW, q) + br(U, W, q)
    if method != "numeric":
        raise ValueError(f"unknown method {method!r}")
    u, Ju = tb.jet(U, q)
    w, Jw = tb.jet(W, q)
    su, Jsu = S.apply_jet(U, q)
    sw, Jsw = S.apply_jet(W, q)
    return (bracket_from_jets(su, Jsu, sw, Jsw) - Sm @ bracket_from_jets(su, Jsu, w, Jw)
            - Sm @ bracket_from_jets(u, Ju, sw, Jsw) + bracket_from_jets(u, Ju, w, Jw))


def _nabla_of_structure(cg: CheegerGromoll, S: ProductStructure, U: Field, W: Field, q: BundlePoint) -> np.ndarray:
    """(nabla~_U S) W = nabla~_U (S W) - S nabla~_U W, via the oracle connection."""
    tb = cg.tb
    Gam = cg.christoffel_oracle(q)
    u, _ = tb.jet(U, q)
    w, Jw = tb.jet(W, q)
    sw, Jsw = S.apply_jet(W, q)
    nab = lambda v, Jv: Jv @ u + np.einsum("kij,i,j->k", Gam, u, v)
    return nab(sw, Jsw) - S.natural_at(q) @ nab(w, Jw)


def w3_cyclic_sum(cg: CheegerGromoll, S: ProductStructure, X: Field, Y: Field, Z: Field,
                  q: BundlePoint) -> tuple[float, float]:
    """Cyclic sum of the Tachibana operator, and cyclic sum of g((nabla~_X S)Y, Z)."""
    triples = ((X, Y, Z), (Y, Z, X), (Z, X, Y))
    phi_sum = sum(tachibana(cg, S, a, b, c, q) for a, b, c in triples)
    nabla_sum = sum(cg.inner(_nabla_of_structure(cg, S, a, b, q), cg.tb.at(c, q), q) for a, b, c in triples)
    return phi_sum, nabla_sum


# -- product conjugate connection ------------------------------------------------

def conjugate_connection(cg: CheegerGromoll, S: ProductStructure, U: Field, W: Field, q: BundlePoint) -> np.ndarray:
    """nabla^(S)_U W = S(nabla~_U (S W)) with nabla~ from the Christoffel oracle."""
    tb = cg.tb
    u, _ = tb.jet(U, q)
    sw, Jsw = S.apply_jet(W, q)
    inner = Jsw @ u + np.einsum("kij,i,j->k", cg.christoffel_oracle(q), u, sw)
    return S.natural_at(q) @ inner


def conjugate_closed_form(cg: CheegerGromoll, U: Field, W: Field, q: BundlePoint) -> np.ndarray:
    """Closed forms of the D I conjugate connection.

    Relative to nabla~: the (g~-g)R term of the HH case and the horizontal
    term of the HV case change sign; VH and VV are unchanged.
    """
    tb = cg.tb
    case = cg_case(U, W)
    if case == "HH":
        X, Y = tb.base_values(U.X, q), tb.base_values(W.X, q)
        return tb.horizontal_lift(cg._nabla_base(U.X, W.X, q), q) - 0.5 * tb.curvature_lift(X, Y, q)
    if case == "HV":
        full = cg.nabla_closed(U, W, q)
        vert = tb._nabla_lift(U.X, W.A, q)
        return -(full - vert) + vert
    return cg.nabla_closed(U, W, q)


def cg_case(U: Field, W: Field) -> str:
    kind = {HorizontalLift: "H", VerticalLift: "V"}
    return kind[type(U)] + kind[type(W)]


def conjugate_coefficients(cg: CheegerGromoll, S: ProductStructure, q: BundlePoint) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients C[K, I, J] of nabla^(S) and their derivatives dC[P, K, I, J].

    C^K_IJ = S^K_L (d_I S^L_J + Gamma~^L_IM S^M_J).
    """
    Gam, dGam = cg.connection_jet(q)
    Sm, dS = S.jet(q)
    ddS = S.second_derivative(q)
    inner = np.einsum("ilj->lij", dS) + np.einsum("lim,mj->lij", Gam, Sm)
    C = np.einsum("kl,lij->kij", Sm, inner)
    dinner = (np.einsum("pilj->plij", ddS) + np.einsum("plim,mj->plij", dGam, Sm)
              + np.einsum("lim,pmj->plij", Gam, dS))
    dC = np.einsum("pkl,lij->pkij", dS, inner) + np.einsum("kl,plij->pkij", Sm, dinner)
    return C, dC


def conjugate_curvature(cg: CheegerGromoll, S: ProductStructure, q: BundlePoint) -> np.ndarray:
    """R^(S)(X, Y)Z = S(R~(X, Y) S Z), as R[M, I, J, K]."""
    R = cg.curvature_numeric(q)
    Sm = S.natural_at(q)
    return np.einsum("mp,pijq,qk->mijk", Sm, R, Sm)


def conjugate_curvature_direct(cg: CheegerGromoll, S: ProductStructure, q: BundlePoint) -> np.ndarray:
    """Curvature computed from the conjugate connection's own coefficients."""
    return curvature_from_jet(*conjugate_coefficients(cg, S, q))


def conjugate_metric_residual(cg: CheegerGromoll, S: ProductStructure, q: BundlePoint, h: float = 1e-5) -> float:
    """max |(nabla^(S)_I g)_JK| with d_I g_JK from central differences."""
    C, _ = conjugate_coefficients(cg, S, q)
    G = cg.natural_matrix(q)
    dG = cg.natural_derivative_fd(q, h)
    res = dG - np.einsum("lij,lk->ijk", C, G) - np.einsum("lik,jl->ijk", C, G)
    return float(np.max(np.abs(res)))


def torsion_tensor(cg: CheegerGromoll, S: ProductStructure, q: BundlePoint) -> np.ndarray:
    """T[K, I, J] = C^K_IJ - C^K_JI."""
    C, _ = conjugate_coefficients(cg, S, q)
    return C - C.transpose(0, 2, 1)


def conjugate_torsion(cg: CheegerGromoll, S: ProductStructure, U: Field, W: Field, q: BundlePoint) -> np.ndarray:
    """T(U, W) = nabla^(S)_U W - nabla^(S)_W U - [U, W]."""
    tb = cg.tb
    u, Ju = tb.jet(U, q)
    w, Jw = tb.jet(W, q)
    return (conjugate_connection(cg, S, U, W, q) - conjugate_connection(cg, S, W, U, q)
            - bracket_from_jets(u, Ju, w, Jw))


def torsion_closed_form(cg: CheegerGromoll, U: Field, W: Field, q: BundlePoint) -> np.ndarray:
    """Torsion of the D I conjugate connection on lift pairs.

    HH: -2 (g~-g)R(X, Y);  HV: -(1/alpha) H(curvature term);  VH: +(1/alpha) H(...);  VV: 0.
    """
    tb = cg.tb
    n = tb.n
    case = cg_case(U, W)
    if case == "HH":
        X, Y = tb.base_values(U.X, q), tb.base_values(W.X, q)
        return -2.0 * tb.curvature_lift(X, Y, q)
    if case == "VV":
        return np.zeros(tb.N)
    if case == "HV":
        X = tb.base_values(U.X, q)
        B = tb.base_values([e for row in W.A for e in row], q).reshape(n, n)
        return -tb.horizontal_lift(cg.curvature_contraction(X, B, q), q) / cg.alpha(q)
    Y = tb.base_values(W.X, q)
    A = tb.base_values([e for row in U.A for e in row], q).reshape(n, n)
    return tb.horizontal_lift(cg.curvature_contraction(Y, A, q), q) / cg.alpha(q)
