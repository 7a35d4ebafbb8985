"""Geometry of the (1,1)-tensor bundle of a Riemannian manifold under a Cheeger-Gromoll type metric.

Symbolic expressions (``expr``), base manifold charts (``manifold``), lifts and
brackets on the bundle (``bundle``), the metric and its Levi-Civita connection
(``cg_metric``), almost product structures (``almost_product``) and the
verification suites (``verify``).
"""

from .almost_product import (ProductStructure, conjugate_connection, conjugate_torsion, diagonal_identity,
                             nijenhuis, purity_defect, random_structure, structure_J, tachibana, w3_cyclic_sum)
from .bundle import BundlePoint, HorizontalLift, TensorBundle, VerticalLift
from .cg_metric import CheegerGromoll
from .expr import differentiate, evaluate, parse, render
from .manifold import ManifoldChart, builtin, christoffel, curvature, load_manifold
from .verify import VerificationReport, run_suite

__version__ = "0.1.0"

__all__ = [
    "BundlePoint", "CheegerGromoll", "HorizontalLift", "ManifoldChart", "ProductStructure", "TensorBundle",
    "VerificationReport", "VerticalLift", "builtin", "christoffel", "conjugate_connection", "conjugate_torsion",
    "curvature", "diagonal_identity", "differentiate", "evaluate", "load_manifold", "nijenhuis", "parse",
    "purity_defect", "random_structure", "render", "run_suite", "structure_J", "tachibana", "w3_cyclic_sum",
]
