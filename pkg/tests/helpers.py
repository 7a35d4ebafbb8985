"""Shared generators for the test modules."""

import math

import numpy as np

from tbgeo import expr as ex

VARS = ("x", "y", "z")


def random_expr(rng: np.random.Generator, depth: int = 4) -> ex.Expr:
    """Random tree over x, y, z built from the parser, so raw (unfolded) shapes get exercised too."""
    return ex.parse(_random_text(rng, depth))


def _random_text(rng, depth):
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.6:
            return str(rng.choice(VARS))
        return f"{rng.uniform(0.1, 3):.3f}"
    kind = rng.integers(0, 9)
    a = _random_text(rng, depth - 1)
    b = _random_text(rng, depth - 1)
    if kind == 0:
        return f"({a} + {b})"
    if kind == 1:
        return f"({a} - {b})"
    if kind == 2:
        return f"({a})*({b})"
    if kind == 3:
        return f"({a})/(1.5 + sin({b}))"
    if kind == 4:
        return f"({a})^{int(rng.integers(2, 4))}"
    if kind == 5:
        return f"{rng.choice(['sin', 'cos'])}({a})"
    if kind == 6:
        return f"exp(sin({a}))"
    if kind == 7:
        return f"sqrt(1 + ({a})^2) + log(2 + cos({b}))"
    return f"-({a})"


def central_difference(e: ex.Expr, v: str, binding: dict, h: float = 1e-6) -> float:
    hi = dict(binding, **{v: binding[v] + h})
    lo = dict(binding, **{v: binding[v] - h})
    return (ex.evaluate(e, hi) - ex.evaluate(e, lo)) / (2 * h)


def derivative_agreement(count: int = 1000, seed: int = 7, rtol: float = 1e-5) -> tuple[int, float]:
    """Compare exact derivatives with central differences on ``count`` random cases.

    Returns (number of cases, worst relative error), relative to max(|exact|, 1).
    """
    rng = np.random.default_rng(seed)
    done, worst = 0, 0.0
    while done < count:
        e = random_expr(rng)
        v = str(rng.choice(VARS))
        b = {name: float(rng.uniform(-1.5, 1.5)) for name in VARS}
        try:
            f = ex.evaluate(e, b)
            exact = ex.evaluate(ex.differentiate(e, v), b)
            fd = central_difference(e, v, b)
        except ex.DomainError:
            continue
        if not all(map(math.isfinite, (f, exact, fd))) or abs(f) > 1e6:
            continue
        scale = max(abs(exact), 1.0)
        worst = max(worst, abs(exact - fd) / scale)
        done += 1
    return done, worst
