"""Command-line harness: ``tbgeo verify``, ``tbgeo eval`` and ``tbgeo list-manifolds``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .almost_product import diagonal_identity, torsion_tensor
from .bundle import TensorBundle
from .cg_metric import CheegerGromoll
from .expr import ExprError
from .manifold import (BUILTIN_MANIFOLDS, ManifoldChart, ManifoldSpecError, SingularMetricError, builtin,
                       christoffel, curvature, load_manifold, metric_at)
from .verify import SUITES, Tolerances, run_suite

EXIT_OK, EXIT_FAIL, EXIT_SPEC = 0, 1, 2

EVAL_OBJECTS = ("metric", "inverse-metric", "christoffel", "curvature", "cg-metric", "bundle-metric",
                "bundle-christoffel", "bundle-curvature", "torsion", "frame")


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{what} must be comma-separated reals, got {text!r}") from None


def _labelled(arr: np.ndarray, names: list[str], template: str) -> dict[str, float]:
    """Flatten ``arr`` into {label: value}; ``template`` uses {0}, {1}, ... for index names."""
    out = {}
    for idx in np.ndindex(arr.shape):
        out[template.format(*(names[i] for i in idx))] = float(arr[idx])
    return out


def _fiber(spec: str | None, n: int) -> np.ndarray:
    if spec is None or spec == "zero":
        return np.zeros((n, n))
    if spec == "identity":
        return np.eye(n)
    vals = _floats(spec, "--fiber")
    if len(vals) != n * n:
        raise ValueError(f"--fiber needs {n * n} values (row-major t^i_j), got {len(vals)}")
    return np.array(vals).reshape(n, n)


def evaluate_object(chart: ManifoldChart, obj: str, point, fiber=None) -> dict:
    """Compute one named object at a base point (and fiber point for bundle objects)."""
    if obj not in EVAL_OBJECTS:
        raise KeyError(f"unknown object {obj!r}; choose from {list(EVAL_OBJECTS)}")
    n = chart.dim
    p = np.asarray(point, dtype=float)
    names = list(chart.coords)
    out: dict = {"object": obj, "manifold": chart.name, "point": dict(zip(names, map(float, p)))}
    if obj in ("metric", "inverse-metric"):
        g, gi = metric_at(chart, p)
        if obj == "metric":
            out["components"] = _labelled(g, names, "g_{{{0} {1}}}")
        else:
            out["components"] = _labelled(gi, names, "g^{{{0} {1}}}")
        return out
    if obj == "christoffel":
        out["components"] = _labelled(christoffel(chart).at(p), names, "Gamma^{0}_{{{1} {2}}}")
        return out
    if obj == "curvature":
        # stored as R[m, k, l, j] = R_{klj}^m
        R = curvature(chart).at(p)
        out["components"] = _labelled(R.transpose(1, 2, 3, 0), names, "R_{{{0} {1} {2}}}^{3}")
        return out

    tb = TensorBundle(chart)
    cg = CheegerGromoll(tb)
    q = tb.point(p, fiber if fiber is not None else np.zeros((n, n)))
    bnames = list(tb.coords)
    out["fiber"] = q.t.tolist()
    if obj in ("cg-metric", "bundle-metric"):
        m = cg.metric_at(q)
        out["alpha"] = float(m.alpha)
        out["r2"] = float(m.r2)
        if obj == "cg-metric":
            out["adapted"] = m.adapted.tolist()
        out["components"] = _labelled(m.natural, bnames, "G_{{{0} {1}}}")
    elif obj == "bundle-christoffel":
        out["components"] = _labelled(cg.christoffel_oracle(q), bnames, "Gamma^{0}_{{{1} {2}}}")
    elif obj == "bundle-curvature":
        out["components"] = _labelled(cg.curvature_numeric(q), bnames, "R^{0}_{{{1} {2} {3}}}")
    elif obj == "torsion":
        out["structure"] = "DI"
        out["components"] = _labelled(torsion_tensor(cg, diagonal_identity(tb), q), bnames, "T^{0}_{{{1} {2}}}")
    elif obj == "frame":
        out["components"] = _labelled(tb.frame(q), bnames, "F[{0},{1}]")
    return out


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tbgeo", description="Geometry of the (1,1)-tensor bundle with a "
                                 "Cheeger-Gromoll type metric: verification and evaluation.")
    sub = ap.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run verification suites and emit a JSON report")
    v.add_argument("--manifold", default="builtin:sphere", help="builtin:<name> or a JSON spec path")
    v.add_argument("--suite", default="all", choices=["all", *SUITES])
    v.add_argument("--samples", type=int, default=20)
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--tol-exact", type=float, default=None,
                   help="override tolerance for exact identities (per-check default, typically 1e-10)")
    v.add_argument("--tol-fd", type=float, default=None,
                   help="override tolerance for oracle/finite-difference comparisons (default 1e-5)")
    v.add_argument("--expect", choices=["zero", "nonzero"], default=None,
                   help="expected magnitude for iff-flat checks (default: zero iff the base is flat)")
    v.add_argument("--report", type=Path, default=None, help="write the JSON report here")
    v.add_argument("--timings", action="store_true", help="include wall times (report no longer byte-stable)")
    v.add_argument("--quiet", action="store_true")

    e = sub.add_parser("eval", help="evaluate one object at a point")
    e.add_argument("object", choices=EVAL_OBJECTS)
    e.add_argument("--manifold", default="builtin:sphere")
    e.add_argument("--point", default=None, help="comma-separated base coordinates (default: domain centre)")
    e.add_argument("--fiber", default=None, help="identity | zero | n^2 comma-separated values of t^i_j")

    sub.add_parser("list-manifolds", help="list builtin manifolds")
    return ap


def _cmd_verify(args) -> int:
    chart = load_manifold(args.manifold)
    if args.samples < 1:
        raise ValueError("--samples must be positive")
    report = run_suite(chart, args.suite, args.samples, args.seed,
                       Tolerances(args.tol_exact, args.tol_fd), args.expect)
    text = report.to_json(timings=args.timings)
    if args.report is not None:
        args.report.write_text(text + "\n", encoding="utf-8")
    if not args.quiet:
        for c in report.checks:
            mark = "PASS" if c.passed else "FAIL"
            print(f"{mark}  {c.residual:.3e} {c.comparison} {c.tolerance:.0e}  {c.name}")
        print(f"{'PASS' if report.passed else 'FAIL'}: {chart.name} suite={args.suite} "
              f"seed={args.seed} samples={args.samples}")
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_eval(args) -> int:
    chart = load_manifold(args.manifold)
    if args.point is None:
        p = [(lo + hi) / 2 for lo, hi in chart.domain]
    else:
        p = _floats(args.point, "--point")
        if len(p) != chart.dim:
            raise ValueError(f"--point needs {chart.dim} values, got {len(p)}")
        if not chart.in_domain(p):
            print(f"warning: point {p} lies outside the domain of {chart.name}", file=sys.stderr)
    fiber = _fiber(args.fiber, chart.dim)
    print(json.dumps(evaluate_object(chart, args.object, p, fiber), indent=2))
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "list-manifolds":
            for name, spec in BUILTIN_MANIFOLDS.items():
                print(f"builtin:{name}  coords={','.join(spec['coords'])}  metric={spec['metric']}")
            return EXIT_OK
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_eval(args)
    except (ManifoldSpecError, SingularMetricError, ExprError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SPEC


if __name__ == "__main__":
    sys.exit(main())
