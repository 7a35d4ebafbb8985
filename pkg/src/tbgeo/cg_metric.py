"""Cheeger-Gromoll type metric on T^1_1(M) and its Levi-Civita connection.

Two independent routes to the connection live here:

* closed forms for the four lift pairings (``nabla_closed``), built from base
  quantities only;
* the Christoffel symbols of the natural-coordinate metric matrix
  (``christoffel_oracle``), obtained by exact differentiation of the metric
  expressions, plus a finite-difference variant of the same.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import expr as ex
from .bundle import (BundleField, BundlePoint, Field, HorizontalLift, TensorBundle,
                     VerticalLift, fiber_slot)
from .manifold import metric_at

__all__ = [
    "fiber_inner", "CGMetricAtPoint", "CheegerGromoll", "CONTRACTION_READINGS",
    "RESOLVED_READING", "NABLA_CASES",
]

NABLA_CASES = ("HH", "HV", "VH", "VV")


def fiber_inner(A, B, g: np.ndarray, ginv: np.ndarray) -> float:
    """G(A, B) = g_it g^jl A^i_j B^t_l."""
    return float(np.einsum("it,jl,ij,tl->", g, ginv, np.asarray(A, float), np.asarray(B, float)))


@dataclass(frozen=True)
class CGMetricAtPoint:
    adapted: np.ndarray
    natural: np.ndarray
    r2: float
    alpha: float


# Candidate index readings of the horizontal curvature term shared by
# nabla_{HX} VB and nabla_{VA} HY.  Each takes base curvature R[m,k,l,j],
# g, g^{-1}, the fiber point t, a base vector X and a (1,1) tensor B, and
# returns a base vector.

def _term_rtb(R, g, gi, t, X, B):
    # g^{bj} R(t_b, B_j) X, with t_b, B_j the b-th / j-th columns
    return np.einsum("bj,pb,lj,s,kpls->k", gi, t, B, X, R)


def _term_gtr(R, g, gi, t, X, B):
    # g_{ai} t^a (g^{-1} o R(., X) B~^i),  B~^i with components g^{bl} B^i_l
    return np.einsum("ai,am,kq,mqsl,s,lb,ib->k", g, t, gi, R, X, gi, B)


def _transposed(t, g, gi):
    # raw index swap of t, ignoring the metric
    return t.T


CONTRACTION_READINGS: dict[str, Callable] = {
    "sum": lambda *a: _term_rtb(*a) + _term_gtr(*a),
    "difference": lambda *a: _term_rtb(*a) - _term_gtr(*a),
    "first-only": _term_rtb,
    "second-only": _term_gtr,
    "swapped-first": lambda R, g, gi, t, X, B: -_term_rtb(R, g, gi, t, X, B) + _term_gtr(R, g, gi, t, X, B),
    "transpose-t": lambda R, g, gi, t, X, B: (_term_rtb(R, g, gi, _transposed(t, g, gi), X, B)
                                             + _term_gtr(R, g, gi, _transposed(t, g, gi), X, B)),
}
# Selected by matching the Christoffel oracle (see ``resolve_reading``).
RESOLVED_READING = "sum"


def _flat(nested) -> list:
    return [e for row in nested for e in row]


class CheegerGromoll:
    """The metric  g on HH pairs, 0 on HV pairs, (1/alpha)(G(A,B) + G(A,t)G(B,t)) on VV pairs."""

    def __init__(self, bundle: TensorBundle, reading: str = RESOLVED_READING):
        if reading not in CONTRACTION_READINGS:
            raise ValueError(f"unknown contraction reading {reading!r}")
        self.tb = bundle
        self.chart = bundle.chart
        self.reading = reading

    # -- symbolic metric ----------------------------------------------------------

    @cached_property
    def adapted_exprs(self) -> tuple:
        """Block-diagonal metric in the adapted frame as an N x N expression matrix."""
        tb = self.tb
        n, N = tb.n, tb.N
        g, gi, t = self.chart.metric, self.chart.inverse_metric, tb.t_sym
        T = [[ex.add(*(g[i][a] * gi[j][b] * t[a][b] for a in range(n) for b in range(n)))
              for i in range(n)] for j in range(n)]  # T[j][i] = T^j_i
        r2 = ex.add(*(t[i][j] * T[j][i] for i in range(n) for j in range(n)))
        inv_alpha = ex.div(ex.ONE, ex.add(ex.ONE, r2))
        M = [[ex.ZERO] * N for _ in range(N)]
        for a in range(n):
            for b in range(n):
                M[a][b] = g[a][b]
        for i, j, k, l in itertools.product(range(n), repeat=4):
            M[fiber_slot(n, i, j)][fiber_slot(n, k, l)] = inv_alpha * (g[i][k] * gi[j][l] + T[j][i] * T[l][k])
        return tuple(tuple(r) for r in M)

    @cached_property
    def natural_exprs(self) -> tuple:
        """F^{-T} G_adapted F^{-1}, symmetric by construction."""
        N = self.tb.N
        Fi, M = self.tb.frame_inverse_exprs, self.adapted_exprs
        nz = lambda e: e is not ex.ZERO
        MFi = [[ex.add(*(M[c][d] * Fi[d][b] for d in range(N) if nz(M[c][d]) and nz(Fi[d][b])))
                for b in range(N)] for c in range(N)]
        out = [[None] * N for _ in range(N)]
        for a in range(N):
            for b in range(a, N):
                out[a][b] = out[b][a] = ex.add(*(Fi[c][a] * MFi[c][b] for c in range(N)
                                                 if nz(Fi[c][a]) and nz(MFi[c][b])))
        return tuple(tuple(r) for r in out)

    @cached_property
    def _upper(self) -> list[tuple[int, int]]:
        N = self.tb.N
        return [(a, b) for a in range(N) for b in range(a, N)]

    @cached_property
    def _G_fn(self):
        G = self.natural_exprs
        return ex.compile_exprs([G[a][b] for a, b in self._upper], self.tb.coords)

    @cached_property
    def _dG_fn(self):
        G, names = self.natural_exprs, self.tb.coords
        return ex.compile_exprs([ex.differentiate(G[a][b], p) for p in names for a, b in self._upper], names)

    @cached_property
    def _ddG_fn(self):
        G, names = self.natural_exprs, self.tb.coords
        N = self.tb.N
        pairs = [(p, r) for p in range(N) for r in range(p, N)]
        exprs = [ex.differentiate(ex.differentiate(G[a][b], names[p]), names[r])
                 for p, r in pairs for a, b in self._upper]
        return pairs, ex.compile_exprs(exprs, names)

    def _sym(self, flat: np.ndarray, lead: tuple[int, ...] = ()) -> np.ndarray:
        N = self.tb.N
        up = self._upper
        flat = flat.reshape(*lead, len(up))
        out = np.empty((*lead, N, N))
        ia = np.array([a for a, _ in up])
        ib = np.array([b for _, b in up])
        out[..., ia, ib] = flat
        out[..., ib, ia] = flat
        return out

    def natural_matrix(self, q: BundlePoint) -> np.ndarray:
        """G_nat at ``q`` from the compiled expressions."""
        return self._sym(self._G_fn(q.coords))

    def natural_derivative(self, q: BundlePoint) -> np.ndarray:
        """``dG[P, I, J]`` = d_P G_IJ, exact."""
        return self._sym(self._dG_fn(q.coords), (self.tb.N,))

    def natural_second_derivative(self, q: BundlePoint) -> np.ndarray:
        """``ddG[P, Q, I, J]`` = d_P d_Q G_IJ, exact."""
        N = self.tb.N
        pairs, fn = self._ddG_fn
        vals = self._sym(fn(q.coords), (len(pairs),))
        out = np.empty((N, N, N, N))
        for k, (p, r) in enumerate(pairs):
            out[p, r] = out[r, p] = vals[k]
        return out

    # -- numeric metric -----------------------------------------------------------

    def metric_at(self, q: BundlePoint) -> CGMetricAtPoint:
        """Adapted block form and natural-coordinate matrix, computed directly in numpy."""
        tb = self.tb
        tb._check(q)
        n, N = tb.n, tb.N
        g, gi = metric_at(self.chart, q.x)
        t = q.t
        T = np.einsum("ia,jb,ab->ji", g, gi, t)
        r2 = float(np.einsum("ij,ji->", t, T))
        alpha = 1.0 + r2
        VV = (np.einsum("ik,jl->ijkl", g, gi) + np.einsum("ji,lk->ijkl", T, T)) / alpha
        adapted = np.zeros((N, N))
        adapted[:n, :n] = g
        adapted[n:, n:] = VV.reshape(n * n, n * n)
        Fi = tb.frame_inverse(q)
        return CGMetricAtPoint(adapted, Fi.T @ adapted @ Fi, r2, alpha)

    def inner(self, u: np.ndarray, v: np.ndarray, q: BundlePoint) -> float:
        return float(u @ self.natural_matrix(q) @ v)

    # -- Christoffel oracle ---------------------------------------------------------

    @staticmethod
    def _christoffel(G: np.ndarray, dG: np.ndarray) -> np.ndarray:
        # lower[L, I, J] = 1/2 (d_I G_LJ + d_J G_LI - d_L G_IJ)
        lower = 0.5 * (np.einsum("ilj->lij", dG) + np.einsum("jli->lij", dG) - dG)
        return np.linalg.solve(G, lower.reshape(G.shape[0], -1)).reshape(lower.shape)

    def christoffel_oracle(self, q: BundlePoint) -> np.ndarray:
        """Gamma~[K, I, J] with nabla~_{d_I} d_J = Gamma~^K_{IJ} d_K, from exact derivatives of G_nat."""
        self.tb._check(q)
        return self._christoffel(self.natural_matrix(q), self.natural_derivative(q))

    def christoffel_fd(self, q: BundlePoint, h: float = 1e-5) -> np.ndarray:
        """Same symbols with d_P G replaced by central differences of G_nat."""
        N = self.tb.N
        c = q.coords
        dG = np.empty((N, N, N))
        for p in range(N):
            e = np.zeros(N)
            e[p] = h
            dG[p] = (self._sym(self._G_fn(c + e)) - self._sym(self._G_fn(c - e))) / (2 * h)
        return self._christoffel(self.natural_matrix(q), dG)

    def natural_derivative_fd(self, q: BundlePoint, h: float = 1e-5) -> np.ndarray:
        N = self.tb.N
        c = q.coords
        out = np.empty((N, N, N))
        for p in range(N):
            e = np.zeros(N)
            e[p] = h
            out[p] = (self._sym(self._G_fn(c + e)) - self._sym(self._G_fn(c - e))) / (2 * h)
        return out

    def connection_jet(self, q: BundlePoint) -> tuple[np.ndarray, np.ndarray]:
        """Gamma~[K, I, J] and its derivative dGamma~[P, K, I, J] = d_P Gamma~^K_IJ."""
        G = self.natural_matrix(q)
        dG = self.natural_derivative(q)
        ddG = self.natural_second_derivative(q)
        Gi = np.linalg.inv(G)
        Gam = np.einsum("kl,lij->kij", Gi, 0.5 * (np.einsum("ilj->lij", dG) + np.einsum("jli->lij", dG) - dG))
        # d_P lower[L, I, J]
        dlower = 0.5 * (np.einsum("pilj->plij", ddG) + np.einsum("pjli->plij", ddG) - ddG)
        dGam = (np.einsum("kl,plij->pkij", Gi, dlower)
                - np.einsum("ka,pab,bij->pkij", Gi, dG, Gam))
        return Gam, dGam

    def curvature_numeric(self, q: BundlePoint) -> np.ndarray:
        """R~[M, I, J, K], the d_M component of R~(d_I, d_J) d_K."""
        return curvature_from_jet(*self.connection_jet(q))

    def nabla_oracle(self, U: Field, W: Field, q: BundlePoint) -> np.ndarray:
        """nabla~_U W = U(W) + Gamma~(U, W) using the Christoffel oracle."""
        u, _ = self.tb.jet(U, q)
        w, Jw = self.tb.jet(W, q)
        return Jw @ u + np.einsum("kij,i,j->k", self.christoffel_oracle(q), u, w)

    # -- closed forms ---------------------------------------------------------------

    def _base(self, q: BundlePoint):
        g, gi = metric_at(self.chart, q.x)
        return self.tb.curvature.at(q.x), g, gi

    def curvature_contraction(self, X, B, q: BundlePoint, reading: str | None = None) -> np.ndarray:
        """The base vector inside the horizontal part of nabla~_{HX} VB (before 1/(2 alpha))."""
        R, g, gi = self._base(q)
        return CONTRACTION_READINGS[reading or self.reading](R, g, gi, q.t, np.asarray(X, float), np.asarray(B, float))

    def alpha(self, q: BundlePoint) -> float:
        g, gi = metric_at(self.chart, q.x)
        return 1.0 + fiber_inner(q.t, q.t, g, gi)

    def vv_closed(self, A, B, q: BundlePoint) -> np.ndarray:
        """Purely vertical nabla~_{VA} VB for (1,1) tensors ``A``, ``B`` at the point."""
        tb = self.tb
        A, B = np.asarray(A, float), np.asarray(B, float)
        vA, vB, vt = tb.vertical_lift(A, q), tb.vertical_lift(B, q), tb.vertical_lift(q.t, q)
        G = self.metric_at(q)
        alpha = G.alpha
        ip = lambda u, v: float(u @ G.natural @ v)
        a_t, b_t, a_b = ip(vA, vt), ip(vB, vt), ip(vA, vB)
        return (-(a_t * vB + b_t * vA) / alpha
                + (alpha + 1) / alpha * a_b * vt
                - a_t * b_t / alpha * vt)

    def nabla_closed(self, U: Field, W: Field, q: BundlePoint) -> np.ndarray:
        """nabla~_U W for pure lifts from the closed forms; case is read off the lift kinds."""
        return self.nabla_closed_form(_case(U, W), U, W, q)

    def nabla_closed_form(self, case: str, U: Field, W: Field, q: BundlePoint) -> np.ndarray:
        if case not in NABLA_CASES:
            raise ValueError(f"unknown case {case!r}; expected one of {NABLA_CASES}")
        if _case(U, W) != case:
            raise ValueError(f"case {case} does not match fields ({type(U).__name__}, {type(W).__name__})")
        tb = self.tb
        n = tb.n
        if case == "HH":
            X, Y = tb.base_values(U.X, q), tb.base_values(W.X, q)
            return tb.horizontal_lift(self._nabla_base(U.X, W.X, q), q) + 0.5 * tb.curvature_lift(X, Y, q)
        if case == "HV":
            X = tb.base_values(U.X, q)
            B = tb.base_values(_flat(W.A), q).reshape(n, n)
            horiz = tb.horizontal_lift(self.curvature_contraction(X, B, q), q) / (2 * self.alpha(q))
            return horiz + tb._nabla_lift(U.X, W.A, q)
        if case == "VH":
            Y = tb.base_values(W.X, q)
            A = tb.base_values(_flat(U.A), q).reshape(n, n)
            return tb.horizontal_lift(self.curvature_contraction(Y, A, q), q) / (2 * self.alpha(q))
        A = tb.base_values(_flat(U.A), q).reshape(n, n)
        B = tb.base_values(_flat(W.A), q).reshape(n, n)
        return self.vv_closed(A, B, q)

    def _nabla_base(self, X, Y, q: BundlePoint) -> np.ndarray:
        """(nabla_X Y)(x) = X^k d_k Y^h + Gamma^h_kj X^k Y^j."""
        tb = self.tb
        n = tb.n
        d = [[ex.differentiate(Y[h], tb.x_names[k]) for k in range(n)] for h in range(n)]
        vals = tb.base_values(list(X) + list(Y) + _flat(d), q)
        Xv, Yv, dY = vals[:n], vals[n:2 * n], vals[2 * n:].reshape(n, n)
        return dY @ Xv + np.einsum("hkj,k,j->h", tb.christoffel.at(q.x), Xv, Yv)

    # -- Koszul --------------------------------------------------------------------

    def directional_metric(self, u: np.ndarray, Y: Field, Z: Field, q: BundlePoint) -> float:
        """u( g(Y, Z) ) at ``q`` for a tangent vector ``u``."""
        y, Jy = self.tb.jet(Y, q)
        z, Jz = self.tb.jet(Z, q)
        G, dG = self.natural_matrix(q), self.natural_derivative(q)
        return float(np.einsum("p,pij,i,j->", u, dG, y, z) + y @ G @ (Jz @ u) + (Jy @ u) @ G @ z)

    def koszul_rhs(self, X: Field, Y: Field, Z: Field, q: BundlePoint) -> float:
        """Six-term Koszul expression using closed-form brackets."""
        tb = self.tb
        x, y, z = tb.at(X, q), tb.at(Y, q), tb.at(Z, q)
        br = tb.bracket_closed
        ip = lambda a, b: self.inner(a, b, q)
        return (self.directional_metric(x, Y, Z, q) + self.directional_metric(y, Z, X, q)
                - self.directional_metric(z, X, Y, q)
                - ip(x, br(Y, Z, q)) + ip(y, br(Z, X, q)) + ip(z, br(X, Y, q)))

    def koszul_lhs(self, X: Field, Y: Field, Z: Field, q: BundlePoint) -> float:
        return 2.0 * self.inner(self.nabla_closed(X, Y, q), self.tb.at(Z, q), q)

    # -- reading resolution -------------------------------------------------------

    def reading_residuals(self, draws: Sequence[tuple[BundlePoint, Field, Field]]) -> dict[str, float]:
        """Max relative mismatch, per candidate reading, of the HV/VH closed forms against the oracle."""
        out = {}
        for name in CONTRACTION_READINGS:
            cg = CheegerGromoll(self.tb, name)
            worst = 0.0
            for q, U, W in draws:
                for a, b in ((U, W), (W, U)):
                    got, want = cg.nabla_closed(a, b, q), self.nabla_oracle(a, b, q)
                    worst = max(worst, relative_residual(got, want))
            out[name] = worst
        return out


def resolve_reading(cg: CheegerGromoll, draws, tol: float = 1e-5) -> str:
    """The unique candidate reading that matches the oracle within ``tol``."""
    res = cg.reading_residuals(draws)
    ok = [k for k, v in res.items() if v < tol]
    if len(ok) != 1:
        raise RuntimeError(f"expected exactly one matching reading, got {ok} ({res})")
    return ok[0]


def _case(U: Field, W: Field) -> str:
    kind = {HorizontalLift: "H", VerticalLift: "V"}
    try:
        return kind[type(U)] + kind[type(W)]
    except KeyError:
        raise TypeError("closed forms need pure horizontal or vertical lifts") from None


def curvature_from_jet(Gam: np.ndarray, dGam: np.ndarray) -> np.ndarray:
    """R[M, I, J, K] = d_I G^M_JK - d_J G^M_IK + G^M_IS G^S_JK - G^M_JS G^S_IK."""
    R = np.einsum("imjk->mijk", dGam) - np.einsum("jmik->mijk", dGam)
    R += np.einsum("mis,sjk->mijk", Gam, Gam) - np.einsum("mjs,sik->mijk", Gam, Gam)
    return R


def relative_residual(got, want) -> float:
    """max |got - want| scaled by max(1, max |want|)."""
    got, want = np.asarray(got, float), np.asarray(want, float)
    return float(np.max(np.abs(got - want), initial=0.0) / max(1.0, float(np.max(np.abs(want), initial=0.0))))
