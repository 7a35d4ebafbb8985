"""Riemannian geometry of a single coordinate chart.

Index layout, fixed everywhere in the package:

* ``christoffel[h][i][j]`` is Gamma^h_{ij}, i.e. nabla_{d_i} d_j = Gamma^h_{ij} d_h;
* ``curvature[m][k][l][j]`` is R_{klj}^m, the d_m component of
  R(d_k, d_l) d_j with R(X, Y) = [nabla_X, nabla_Y] - nabla_[X,Y].
"""

from __future__ import annotations

import json
import math
import weakref
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np

from . import expr as ex
from .expr import Expr

__all__ = [
    "ManifoldChart", "ManifoldSpecError", "SingularMetricError",
    "ChristoffelField", "CurvatureField",
    "BUILTIN_MANIFOLDS", "builtin", "load_manifold", "chart_from_dict",
    "metric_at", "christoffel", "curvature", "covariant_derivative_11",
    "sectional_curvature", "sample_points", "symbolic_inverse",
]


class ManifoldSpecError(ValueError):
    """A manifold description failed to load or validate."""


class SingularMetricError(ValueError):
    pass


def _det(m: list[list[Expr]]) -> Expr:
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    terms = []
    for j in range(n):
        if m[0][j] is ex.ZERO:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        term = m[0][j] * _det(minor)
        terms.append(term if j % 2 == 0 else -term)
    return ex.add(*terms)


def symbolic_inverse(m: Sequence[Sequence[Expr]]) -> list[list[Expr]]:
    """Adjugate inverse; meant for the small charts handled here."""
    m = [list(row) for row in m]
    n = len(m)
    if n == 1:
        return [[ex.div(ex.ONE, m[0][0])]]
    det = _det(m)
    inv = [[ex.ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:j] + row[j + 1:] for k, row in enumerate(m) if k != i]
            cof = _det(minor)
            inv[j][i] = ex.div(cof if (i + j) % 2 == 0 else -cof, det)
    return inv


@dataclass(frozen=True, eq=False)
class ManifoldChart:
    name: str
    coords: tuple[str, ...]
    metric: tuple[tuple[Expr, ...], ...]
    domain: tuple[tuple[float, float], ...]

    def __post_init__(self):
        n = len(self.coords)
        if len(set(self.coords)) != n:
            raise ManifoldSpecError("coordinate names must be distinct")
        if len(self.metric) != n or any(len(row) != n for row in self.metric):
            raise ManifoldSpecError(f"metric must be {n}x{n}")
        if len(self.domain) != n or any(lo >= hi for lo, hi in self.domain):
            raise ManifoldSpecError("domain must give one increasing interval per coordinate")
        allowed = set(self.coords)
        for row in self.metric:
            for e in row:
                extra = ex.free_variables(e) - allowed
                if extra:
                    raise ManifoldSpecError(f"unknown identifier(s) in metric: {sorted(extra)}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def binding(self, p: Sequence[float]) -> dict[str, float]:
        return dict(zip(self.coords, map(float, p)))

    @cached_property
    def inverse_metric(self) -> list[list[Expr]]:
        return symbolic_inverse(self.metric)

    @cached_property
    def _metric_fn(self):
        n = self.dim
        flat = [self.metric[i][j] for i in range(n) for j in range(n)]
        return ex.compile_exprs(flat, self.coords)

    def in_domain(self, p: Sequence[float]) -> bool:
        return all(lo <= x <= hi for x, (lo, hi) in zip(p, self.domain))


def chart_from_dict(spec: dict) -> ManifoldChart:
    """Build a chart from the JSON manifold schema, validating as we go."""
    try:
        name = str(spec["name"])
        n = int(spec["dim"])
        coords = tuple(str(c) for c in spec["coords"])
        rows = spec["metric"]
        domain = tuple((float(lo), float(hi)) for lo, hi in spec["domain"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifoldSpecError(f"malformed manifold spec: {exc!r}") from None
    if spec.get("schema", 1) != 1:
        raise ManifoldSpecError(f"unsupported schema {spec.get('schema')!r}")
    if len(coords) != n:
        raise ManifoldSpecError(f"dim={n} but {len(coords)} coordinate names")
    if not isinstance(rows, list) or len(rows) != n or any(not isinstance(r, list) or len(r) != n for r in rows):
        raise ManifoldSpecError(f"metric must be an {n}x{n} array of expression strings")
    try:
        metric = tuple(tuple(ex.parse(str(s)) for s in row) for row in rows)
    except ex.ExprError as exc:
        raise ManifoldSpecError(f"bad metric expression: {exc}") from None
    chart = ManifoldChart(name, coords, metric, domain)
    _check_symmetric(chart)
    return chart


def _check_symmetric(chart: ManifoldChart, samples: int = 5) -> None:
    n = chart.dim
    rng = np.random.default_rng(0)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = chart.metric[i][j], chart.metric[j][i]
            if a is b:
                continue
            for p in sample_points(chart, samples, rng):
                bnd = chart.binding(p)
                va, vb = ex.evaluate(a, bnd), ex.evaluate(b, bnd)
                if abs(va - vb) > 1e-12 * max(1.0, abs(va)):
                    raise ManifoldSpecError(f"metric is not symmetric in entries ({i},{j}) and ({j},{i})")


def load_manifold(source: str | Path) -> ManifoldChart:
    """Load ``builtin:<name>`` or a JSON manifold file."""
    source = str(source)
    if source.startswith("builtin:"):
        return builtin(source.split(":", 1)[1])
    try:
        spec = json.loads(Path(source).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifoldSpecError(f"cannot read {source}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ManifoldSpecError(f"{source} is not valid JSON: {exc}") from None
    if not isinstance(spec, dict):
        raise ManifoldSpecError("manifold spec must be a JSON object")
    return chart_from_dict(spec)


BUILTIN_MANIFOLDS = {
    "flat2": {
        "name": "flat2", "dim": 2, "coords": ["x", "y"],
        "metric": [["1", "0"], ["0", "1"]],
        "domain": [[-1.0, 1.0], [-1.0, 1.0]],
    },
    "sphere": {
        "name": "sphere", "dim": 2, "coords": ["th", "ph"],
        "metric": [["1", "0"], ["0", "sin(th)^2"]],
        "domain": [[0.3, math.pi - 0.3], [0.0, 2 * math.pi]],
    },
    "hyperbolic": {
        "name": "hyperbolic", "dim": 2, "coords": ["rho", "ph"],
        "metric": [["1", "0"], ["0", "sinh(rho)^2"]],
        "domain": [[0.3, 2.0], [0.0, 2 * math.pi]],
    },
}
_builtin_cache: dict[str, ManifoldChart] = {}


def builtin(name: str) -> ManifoldChart:
    if name not in BUILTIN_MANIFOLDS:
        raise ManifoldSpecError(f"unknown builtin manifold {name!r}; choose from {sorted(BUILTIN_MANIFOLDS)}")
    if name not in _builtin_cache:
        _builtin_cache[name] = chart_from_dict(BUILTIN_MANIFOLDS[name])
    return _builtin_cache[name]


def sample_points(chart: ManifoldChart, count: int, rng: np.random.Generator) -> np.ndarray:
    lo = np.array([d[0] for d in chart.domain])
    hi = np.array([d[1] for d in chart.domain])
    return lo + (hi - lo) * rng.random((count, chart.dim))


def metric_at(chart: ManifoldChart, p: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """Metric matrix and its inverse at ``p``."""
    n = chart.dim
    g = chart._metric_fn(p).reshape(n, n)
    if np.linalg.cond(g) > 1e12:
        raise SingularMetricError(f"metric of {chart.name} is singular at {[float(v) for v in p]}")
    return g, np.linalg.inv(g)


@dataclass(frozen=True, eq=False)
class ChristoffelField:
    """Gamma^h_{ij} as expressions; ``components[h][i][j]``."""

    chart: ManifoldChart
    components: tuple

    def gamma(self, h: int, i: int, j: int) -> Expr:
        return self.components[h][i][j]

    @cached_property
    def _fn(self):
        return ex.compile_exprs(list(_flatten(self.components)), self.chart.coords)

    def at(self, p: Sequence[float]) -> np.ndarray:
        n = self.chart.dim
        return self._fn(p).reshape(n, n, n)


@dataclass(frozen=True, eq=False)
class CurvatureField:
    """R_{klj}^m as expressions; ``components[m][k][l][j]``."""

    chart: ManifoldChart
    components: tuple

    def riemann(self, m: int, k: int, l: int, j: int) -> Expr:
        return self.components[m][k][l][j]

    @cached_property
    def _fn(self):
        return ex.compile_exprs(list(_flatten(self.components)), self.chart.coords)

    def at(self, p: Sequence[float]) -> np.ndarray:
        n = self.chart.dim
        return self._fn(p).reshape(n, n, n, n)


def _flatten(nested):
    if isinstance(nested, Expr):
        yield nested
    else:
        for item in nested:
            yield from _flatten(item)


def _freeze(nested):
    if isinstance(nested, Expr):
        return nested
    return tuple(_freeze(x) for x in nested)


_christoffel_cache: "weakref.WeakKeyDictionary[ManifoldChart, ChristoffelField]" = weakref.WeakKeyDictionary()
_curvature_cache: "weakref.WeakKeyDictionary[ManifoldChart, CurvatureField]" = weakref.WeakKeyDictionary()


def christoffel(chart: ManifoldChart) -> ChristoffelField:
    """Levi-Civita symbols  1/2 g^{hm} (d_i g_mj + d_j g_mi - d_m g_ij)."""
    if chart in _christoffel_cache:
        return _christoffel_cache[chart]
    n, g, gi, x = chart.dim, chart.metric, chart.inverse_metric, chart.coords
    d = ex.differentiate
    lower = [[[ex.mul(0.5, d(g[m][j], x[i]) + d(g[m][i], x[j]) - d(g[i][j], x[m]))
               for j in range(n)] for i in range(n)] for m in range(n)]
    comps = [[[None] * n for _ in range(n)] for _ in range(n)]
    for h in range(n):
        for i in range(n):
            for j in range(i, n):
                comps[h][i][j] = comps[h][j][i] = ex.add(*(gi[h][m] * lower[m][i][j] for m in range(n)))
    field_ = ChristoffelField(chart, _freeze(comps))
    _christoffel_cache[chart] = field_
    return field_


def curvature(chart: ManifoldChart) -> CurvatureField:
    """R_{klj}^m = d_k G^m_lj - d_l G^m_kj + G^m_ks G^s_lj - G^m_ls G^s_kj."""
    if chart in _curvature_cache:
        return _curvature_cache[chart]
    n, x = chart.dim, chart.coords
    G = christoffel(chart).components
    d = ex.differentiate
    comps = [[[[ex.ZERO] * n for _ in range(n)] for _ in range(n)] for _ in range(n)]
    for m in range(n):
        for k in range(n):
            for l in range(k + 1, n):
                for j in range(n):
                    r = ex.add(
                        d(G[m][l][j], x[k]), -d(G[m][k][j], x[l]),
                        *(G[m][k][s] * G[s][l][j] - G[m][l][s] * G[s][k][j] for s in range(n)),
                    )
                    comps[m][k][l][j] = r
                    comps[m][l][k][j] = -r
    field_ = CurvatureField(chart, _freeze(comps))
    _curvature_cache[chart] = field_
    return field_


def covariant_derivative_11(chart: ManifoldChart, A: Sequence[Sequence[Expr]]) -> tuple:
    """(nabla_k A)^i_j as ``result[k][i][j]`` for a (1,1) field ``A[i][j] = A^i_j``."""
    n, x = chart.dim, chart.coords
    G = christoffel(chart).components
    A = [[ex.as_expr(a) for a in row] for row in A]
    return _freeze([[[ex.add(
        ex.differentiate(A[i][j], x[k]),
        *(G[i][k][m] * A[m][j] for m in range(n)),
        *(-(G[m][k][j] * A[i][m]) for m in range(n)),
    ) for j in range(n)] for i in range(n)] for k in range(n)])


def sectional_curvature(chart: ManifoldChart, p: Sequence[float], u=None, v=None) -> float:
    """K(u, v) = g(R(u,v)v, u) / (g(u,u) g(v,v) - g(u,v)^2); defaults to the first two axes."""
    n = chart.dim
    u = np.eye(n)[0] if u is None else np.asarray(u, float)
    v = np.eye(n)[1] if v is None else np.asarray(v, float)
    g, _ = metric_at(chart, p)
    R = curvature(chart).at(p)
    Ruvv = np.einsum("mklj,k,l,j->m", R, u, v, v)
    return float(u @ g @ Ruvv / ((u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2))
