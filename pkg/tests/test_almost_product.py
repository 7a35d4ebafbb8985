import itertools

import numpy as np
import pytest

from tbgeo import expr as ex
from tbgeo.almost_product import (ProductStructure, conjugate_closed_form, conjugate_connection,
                                  conjugate_curvature, conjugate_curvature_direct, conjugate_metric_residual,
                                  conjugate_torsion, diag_lift_apply, diagonal_identity, nijenhuis, purity_defect,
                                  random_structure, structure_J, tachibana, tachibana_closed, torsion_closed_form,
                                  torsion_tensor, w3_cyclic_sum)
from tbgeo.bundle import HorizontalLift, TensorBundle
from tbgeo.cg_metric import CheegerGromoll, relative_residual
from tbgeo.manifold import builtin
from tbgeo.verify import random_draw

CG = {name: CheegerGromoll(TensorBundle(builtin(name))) for name in ("sphere", "hyperbolic", "flat2")}
CURVED = ["sphere", "hyperbolic"]


def draws(name, count, seed=0, **kw):
    rng = np.random.default_rng(seed)
    return [random_draw(CG[name].tb, rng, **kw) for _ in range(count)]


def triples(d):
    for kinds in itertools.product("HV", repeat=3):
        yield "".join(kinds), tuple((d.H if k == "H" else d.V)[i] for i, k in enumerate(kinds))


def pairs(d):
    return {"HH": (d.H[0], d.H[1]), "HV": (d.H[0], d.V[0]), "VH": (d.V[0], d.H[0]), "VV": (d.V[0], d.V[1])}


def test_diagonal_lift_of_identity():
    tb = CG["sphere"].tb
    d = draws("sphere", 1)[0]
    I = [[ex.ONE, ex.ZERO], [ex.ZERO, ex.ONE]]
    np.testing.assert_allclose(diag_lift_apply(tb, I, d.H[0], d.q), tb.at(d.H[0], d.q), atol=1e-15)
    np.testing.assert_allclose(diag_lift_apply(tb, I, d.V[0], d.q), -tb.at(d.V[0], d.q), atol=1e-15)
    DI = diagonal_identity(tb)
    for f in (d.H[0], d.V[0]):
        np.testing.assert_allclose(DI.apply(tb.at(f, d.q), d.q), diag_lift_apply(tb, I, f, d.q), atol=1e-12)


@pytest.mark.parametrize("make", [diagonal_identity, structure_J], ids=["DI", "J"])
def test_structures_are_involutions(make):
    tb = CG["hyperbolic"].tb
    S = make(tb)
    assert S.is_involution
    for d in draws("hyperbolic", 3):
        for f in (d.H[0], d.V[0]):
            v = tb.at(f, d.q)
            np.testing.assert_allclose(S.apply(S.apply(v, d.q), d.q), v, atol=1e-12)


def test_structure_J_signs():
    tb = CG["sphere"].tb
    J = structure_J(tb)
    d = draws("sphere", 1)[0]
    np.testing.assert_allclose(J.apply(tb.at(d.H[0], d.q), d.q), -tb.at(d.H[0], d.q), atol=1e-12)
    np.testing.assert_allclose(J.apply(tb.at(d.V[0], d.q), d.q), tb.at(d.V[0], d.q), atol=1e-12)


def test_structure_shape_checked():
    with pytest.raises(ValueError):
        ProductStructure("bad", CG["sphere"].tb, np.eye(3))


@pytest.mark.parametrize("name", CG)
@pytest.mark.parametrize("make", [diagonal_identity, structure_J], ids=["DI", "J"])
def test_purity(name, make):
    cg = CG[name]
    S = make(cg.tb)
    for d in draws(name, 50, seed=1):
        lifts = d.H[:2] + d.V[:2]
        for a in lifts:
            for b in lifts:
                assert abs(purity_defect(cg, S, a, b, d.q)) < 1e-12


def test_random_structure_is_not_pure():
    cg = CG["sphere"]
    R = random_structure(cg.tb, np.random.default_rng(0))
    assert R.is_involution
    d = draws("sphere", 1, seed=2)[0]
    worst = max(abs(purity_defect(cg, R, a, b, d.q)) for a in d.H + d.V for b in d.H + d.V)
    assert worst > 1e-3


@pytest.mark.parametrize("name", CURVED)
def test_tachibana_slot_table(name):
    cg = CG[name]
    DI = diagonal_identity(cg.tb)
    for d in draws(name, 5, seed=3, constant_fields=True):
        for kinds, (X, Y, Z) in triples(d):
            phi = tachibana(cg, DI, X, Y, Z, d.q)
            if kinds in ("HVH", "HHV"):
                want = tachibana_closed(cg, X, Y, Z, d.q)
                assert abs(phi - want) < 1e-5 * max(1.0, abs(want))
            else:
                assert abs(phi) < 1e-8
                assert tachibana_closed(cg, X, Y, Z, d.q) == 0.0


def test_tachibana_hvh_value():
    # Phi(HX, VB, HZ) = 2 g(VB, (g~-g)R(Z, X)) assembled by hand here
    cg = CG["sphere"]
    tb = cg.tb
    DI = diagonal_identity(tb)
    d = draws("sphere", 1, seed=4, constant_fields=True)[0]
    X, B, Z = d.H[0], d.V[0], d.H[1]
    Xv, Zv = tb.base_values(X.X, d.q), tb.base_values(Z.X, d.q)
    rho = np.einsum("mklj,k,l->mj", tb.curvature.at(d.q.x), Zv, Xv)
    lift = tb.vertical_lift(d.q.t @ rho - rho @ d.q.t, d.q)
    want = 2 * tb.at(B, d.q) @ cg.natural_matrix(d.q) @ lift
    assert abs(want) > 1e-3
    assert tachibana(cg, DI, X, B, Z, d.q) == pytest.approx(want, rel=1e-8)


def test_tachibana_vanishes_on_flat_base():
    cg = CG["flat2"]
    DI = diagonal_identity(cg.tb)
    for d in draws("flat2", 5, seed=5):
        for _, f in triples(d):
            assert abs(tachibana(cg, DI, *f, d.q)) < 1e-8


def test_tachibana_nonzero_on_curved_bases():
    for name in CURVED:
        cg = CG[name]
        DI = diagonal_identity(cg.tb)
        vals = [tachibana(cg, DI, d.H[0], d.V[0], d.H[1], d.q) for d in draws(name, 20, seed=6, constant_fields=True)]
        assert max(map(abs, vals)) > 1e-3


def test_nijenhuis_examples():
    cg = CG["sphere"]
    tb = cg.tb
    DI = diagonal_identity(tb)
    for d in draws("sphere", 5, seed=7):
        assert np.max(np.abs(nijenhuis(cg, DI, d.V[0], d.V[1], d.q))) < 1e-12
        want = 4 * tb.curvature_lift(tb.base_values(d.H[0].X, d.q), tb.base_values(d.H[1].X, d.q), d.q)
        assert np.max(np.abs(nijenhuis(cg, DI, d.H[0], d.H[1], d.q) - want)) < 1e-8
    flat = CG["flat2"]
    FI = diagonal_identity(flat.tb)
    for d in draws("flat2", 3, seed=8):
        for U, W in pairs(d).values():
            assert np.max(np.abs(nijenhuis(flat, FI, U, W, d.q))) < 1e-12


@pytest.mark.parametrize("name", CG)
def test_nijenhuis_paths_agree(name):
    cg = CG[name]
    DI = diagonal_identity(cg.tb)
    for d in draws(name, 3, seed=9):
        for U, W in pairs(d).values():
            a = nijenhuis(cg, DI, U, W, d.q, method="closed")
            b = nijenhuis(cg, DI, U, W, d.q, method="numeric")
            assert relative_residual(a, b) < 1e-8


def test_nijenhuis_argument_errors():
    cg = CG["sphere"]
    d = draws("sphere", 1)[0]
    R = random_structure(cg.tb, np.random.default_rng(1))
    with pytest.raises(TypeError):
        nijenhuis(cg, R, d.H[0], d.V[0], d.q)
    with pytest.raises(ValueError):
        nijenhuis(cg, diagonal_identity(cg.tb), d.H[0], d.V[0], d.q, method="guess")
    # the numeric path accepts any structure
    assert np.all(np.isfinite(nijenhuis(cg, R, d.H[0], d.V[0], d.q, method="numeric")))


@pytest.mark.parametrize("name", CG)
@pytest.mark.parametrize("make", [diagonal_identity, structure_J], ids=["DI", "J"])
def test_w3_cyclic_sum(name, make):
    cg = CG[name]
    S = make(cg.tb)
    for d in draws(name, 2, seed=10, constant_fields=True):
        for _, f in triples(d):
            phi_sum, nabla_sum = w3_cyclic_sum(cg, S, *f, d.q)
            assert abs(phi_sum) < 1e-5
            assert abs(nabla_sum) < 1e-5


def test_w3_random_structure_control():
    cg = CG["sphere"]
    R = random_structure(cg.tb, np.random.default_rng(2))
    d = draws("sphere", 1, seed=11, constant_fields=True)[0]
    assert abs(w3_cyclic_sum(cg, R, d.H[0], d.V[0], d.H[1], d.q)[1]) > 1e-3


@pytest.mark.parametrize("name", CG)
def test_conjugate_closed_forms(name):
    cg = CG[name]
    DI = diagonal_identity(cg.tb)
    for d in draws(name, 10, seed=12):
        for U, W in pairs(d).values():
            got = conjugate_connection(cg, DI, U, W, d.q)
            assert relative_residual(got, conjugate_closed_form(cg, U, W, d.q)) < 1e-5


def test_conjugate_vv_equals_levi_civita():
    cg = CG["hyperbolic"]
    DI = diagonal_identity(cg.tb)
    d = draws("hyperbolic", 1, seed=13)[0]
    assert relative_residual(conjugate_connection(cg, DI, d.V[0], d.V[1], d.q),
                             cg.nabla_closed(d.V[0], d.V[1], d.q)) < 1e-12


def test_conjugate_coincides_on_flat_base():
    cg = CG["flat2"]
    DI = diagonal_identity(cg.tb)
    for d in draws("flat2", 5, seed=14):
        for U, W in pairs(d).values():
            assert relative_residual(conjugate_connection(cg, DI, U, W, d.q), cg.nabla_oracle(U, W, d.q)) < 1e-12


def test_conjugate_differs_on_curved_base():
    cg = CG["sphere"]
    DI = diagonal_identity(cg.tb)
    d = draws("sphere", 1, seed=15)[0]
    U, W = d.H[0], d.H[1]
    assert relative_residual(conjugate_connection(cg, DI, U, W, d.q), cg.nabla_oracle(U, W, d.q)) > 1e-3


@pytest.mark.parametrize("name", CG)
def test_conjugate_connection_is_metric(name):
    cg = CG[name]
    DI = diagonal_identity(cg.tb)
    for d in draws(name, 3, seed=16):
        assert conjugate_metric_residual(cg, DI, d.q) < 1e-5


@pytest.mark.parametrize("name", CG)
def test_conjugate_curvature_relation(name):
    cg = CG[name]
    DI = diagonal_identity(cg.tb)
    for d in draws(name, 3, seed=17):
        assert relative_residual(conjugate_curvature(cg, DI, d.q), conjugate_curvature_direct(cg, DI, d.q)) < 1e-5


def test_identity_structure_gives_back_levi_civita():
    cg = CG["sphere"]
    ident = ProductStructure("id", cg.tb, np.eye(cg.tb.N))
    q = draws("sphere", 1, seed=18)[0].q
    assert relative_residual(conjugate_curvature_direct(cg, ident, q), cg.curvature_numeric(q)) < 1e-12
    assert np.max(np.abs(torsion_tensor(cg, ident, q))) < 1e-12


@pytest.mark.parametrize("name", CG)
def test_torsion_case_list(name):
    cg = CG[name]
    DI = diagonal_identity(cg.tb)
    for d in draws(name, 10, seed=19):
        for case, (U, W) in pairs(d).items():
            got = conjugate_torsion(cg, DI, U, W, d.q)
            assert relative_residual(got, torsion_closed_form(cg, U, W, d.q)) < 1e-5
            if case == "VV":
                assert np.max(np.abs(got)) < 1e-10


def test_torsion_vanishes_on_flat_base():
    cg = CG["flat2"]
    DI = diagonal_identity(cg.tb)
    for d in draws("flat2", 5, seed=20):
        for U, W in pairs(d).values():
            assert np.max(np.abs(conjugate_torsion(cg, DI, U, W, d.q))) < 1e-10
        assert np.max(np.abs(torsion_tensor(cg, DI, d.q))) < 1e-10


def test_torsion_sphere_hh_value():
    cg = CG["sphere"]
    tb = cg.tb
    DI = diagonal_identity(tb)
    q = tb.point([1.0, 0.0], np.array([[0.0, 1.0], [0.0, 0.0]]))
    one, zero = ex.ONE, ex.ZERO
    U, W = HorizontalLift((one, zero)), HorizontalLift((zero, one))
    want = -2 * tb.curvature_lift([1, 0], [0, 1], q)
    assert np.max(np.abs(want)) > 1e-3
    np.testing.assert_allclose(conjugate_torsion(cg, DI, U, W, q), want, atol=1e-10)
    # the torsion tensor contracted with the lifted vectors gives the same value
    T = torsion_tensor(cg, DI, q)
    hx, hy = tb.horizontal_lift([1, 0], q), tb.horizontal_lift([0, 1], q)
    np.testing.assert_allclose(np.einsum("kij,i,j->k", T, hx, hy), want, atol=1e-10)


def test_torsion_hh_vanishes_at_identity_fiber():
    # t = I commutes with every curvature endomorphism, so -2(g~-g)R(X,Y) = 0 there
    cg = CG["sphere"]
    DI = diagonal_identity(cg.tb)
    d = draws("sphere", 1, seed=21, t=np.eye(2))[0]
    assert np.max(np.abs(conjugate_torsion(cg, DI, d.H[0], d.H[1], d.q))) < 1e-10
