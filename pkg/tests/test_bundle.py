import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tbgeo import expr as ex
from tbgeo.bundle import (BracketKindError, BundleField, HorizontalLift, TensorBundle, VerticalLift,
                          bracket_from_jets, fiber_slot)
from tbgeo.manifold import builtin
from tbgeo.verify import random_draw
from test_manifold import fd_christoffel

SPHERE = TensorBundle(builtin("sphere"))
FLAT = TensorBundle(builtin("flat2"))
HYPER = TensorBundle(builtin("hyperbolic"))
ALL = [SPHERE, HYPER, FLAT]
ids = lambda tb: tb.chart.name


def test_vertical_lift_examples():
    q = SPHERE.point([1.0, 0.5])
    np.testing.assert_array_equal(SPHERE.vertical_lift(np.eye(2), q), [0, 0, 1, 0, 0, 1])
    np.testing.assert_array_equal(SPHERE.vertical_lift(np.zeros((2, 2)), q), np.zeros(6))
    A = np.zeros((2, 2))
    A[0, 1] = 3
    v = SPHERE.vertical_lift(A, q)
    assert fiber_slot(2, 0, 1) == 3
    assert v[3] == 3 and np.count_nonzero(v) == 1


def test_horizontal_lift_examples():
    q = FLAT.point([0.1, 0.2], np.array([[1.0, 2.0], [3.0, 4.0]]))
    np.testing.assert_array_equal(FLAT.horizontal_lift([1, 0], q), [1, 0, 0, 0, 0, 0])
    q0 = SPHERE.point([0.7, 0.1])
    assert np.all(SPHERE.horizontal_lift([0.3, -2.0], q0)[2:] == 0)


def test_horizontal_lift_sphere_oracle():
    # vertical part of HX is the rate of change of t under parallel transport along X:
    # dt^i_j/ds = X^s (Gamma^m_{sj} t^i_m - Gamma^i_{sm} t^m_j), Gamma from metric differences
    p = np.array([math.pi / 4, 0.0])
    t = np.eye(2)
    G = fd_christoffel(SPHERE.chart, p)
    X = np.array([1.0, 0.0])
    want = np.zeros((2, 2))
    for i in range(2):
        for j in range(2):
            for s in range(2):
                for m in range(2):
                    want[i, j] += X[s] * (G[m, s, j] * t[i, m] - G[i, s, m] * t[m, j])
    got = SPHERE.horizontal_lift(X, SPHERE.point(p, t))
    np.testing.assert_allclose(got[2:], want.reshape(-1), atol=1e-6)
    # with t = I the two transport terms cancel
    assert np.max(np.abs(got[2:])) < 1e-12


def test_gamma_ops_hand_example():
    q = SPHERE.point([1.0, 1.0], np.array([[0.0, 1.0], [0.0, 0.0]]))
    phi = np.array([[0.0, 0.0], [1.0, 0.0]])
    g, gt = SPHERE.gamma_ops(phi, q)
    np.testing.assert_array_equal(g[2:].reshape(2, 2), [[0, 0], [0, 1]])
    np.testing.assert_array_equal(gt[2:].reshape(2, 2), [[1, 0], [0, 0]])


def test_gamma_ops_identity_and_zero():
    t = np.array([[0.3, -1.2], [2.0, 0.5]])
    q = SPHERE.point([1.0, 1.0], t)
    g, gt = SPHERE.gamma_ops(np.eye(2), q)
    np.testing.assert_array_equal(g, SPHERE.vertical_lift(t, q))
    np.testing.assert_array_equal(gt, SPHERE.vertical_lift(t, q))
    g, gt = SPHERE.gamma_ops(np.diag([1.0, 2.0]), SPHERE.point([1.0, 1.0]))
    assert not g.any() and not gt.any()


@pytest.mark.parametrize("tb", ALL, ids=ids)
def test_frame_inverse(tb):
    rng = np.random.default_rng(0)
    for _ in range(10):
        q = random_draw(tb, rng).q
        F, Fi = tb.frame(q), tb.frame_inverse(q)
        np.testing.assert_allclose(F @ Fi, np.eye(tb.N), atol=1e-12)
        np.testing.assert_allclose(np.linalg.inv(F), Fi, atol=1e-12)


@pytest.mark.parametrize("tb", ALL, ids=ids)
def test_frame_columns_are_lifts(tb):
    q = random_draw(tb, np.random.default_rng(1)).q
    F = tb.frame(q)
    for k in range(tb.n):
        np.testing.assert_allclose(F[:, k], tb.horizontal_lift(np.eye(tb.n)[k], q), atol=1e-15)
    h, v = tb.split(F[:, 0] + 2 * F[:, tb.n + 1], q)
    np.testing.assert_allclose(h, np.eye(tb.n)[0], atol=1e-14)
    np.testing.assert_allclose(v.reshape(-1), 2 * np.eye(tb.n * tb.n)[1], atol=1e-14)


def test_coordinate_brackets():
    x = ex.var("x")
    zero = (ex.ZERO,) * 4
    d0 = BundleField((ex.ONE, ex.ZERO) + zero)
    d1 = BundleField((ex.ZERO, ex.ONE) + zero)
    x_d1 = BundleField((ex.ZERO, x) + zero)
    q = FLAT.point([0.4, -0.3])
    assert not FLAT.bracket_numeric(d0, d1, q).any()
    np.testing.assert_array_equal(FLAT.bracket_numeric(x_d1, d0, q), [0, -1, 0, 0, 0, 0])


@pytest.mark.parametrize("tb", ALL, ids=ids)
def test_vertical_brackets_vanish(tb):
    d = random_draw(tb, np.random.default_rng(2))
    assert np.max(np.abs(tb.bracket_numeric(d.V[0], d.V[1], d.q))) < 1e-14
    assert not tb.bracket_closed(d.V[0], d.V[1], d.q).any()


def test_flat_horizontal_bracket_is_lifted_base_bracket():
    d = random_draw(FLAT, np.random.default_rng(3))
    XY = FLAT.base_values(FLAT.base_bracket(d.H[0].X, d.H[1].X), d.q)
    np.testing.assert_allclose(FLAT.bracket_closed(d.H[0], d.H[1], d.q), FLAT.horizontal_lift(XY, d.q), atol=1e-15)


def test_sphere_coordinate_field_bracket():
    one, zero = ex.ONE, ex.ZERO
    q = SPHERE.point([math.pi / 4, 0.0], np.eye(2))
    U, W = HorizontalLift((one, zero)), HorizontalLift((zero, one))
    np.testing.assert_allclose(SPHERE.bracket_closed(U, W, q), SPHERE.bracket_numeric(U, W, q), atol=1e-5)


@pytest.mark.parametrize("tb", ALL, ids=ids)
@pytest.mark.parametrize("pair", ["HH", "HV", "VH", "VV"])
def test_closed_brackets_match_commutator(tb, pair):
    rng = np.random.default_rng(4)
    for _ in range(20):
        d = random_draw(tb, rng)
        U = d.H[0] if pair[0] == "H" else d.V[0]
        W = d.H[1] if pair[1] == "H" else d.V[1]
        want = tb.bracket_numeric(U, W, d.q)
        got = tb.bracket_closed(U, W, d.q)
        assert np.max(np.abs(got - want)) <= 1e-5 * max(1.0, np.max(np.abs(want)))


def test_curvature_term_sign_fixed_by_commutator():
    # at t with [t, rho] != 0 the H-H bracket picks up +(gamma~ - gamma)R; the opposite sign would fail
    one, zero = ex.ONE, ex.ZERO
    q = SPHERE.point([1.0, 0.0], np.array([[0.0, 1.0], [0.0, 0.0]]))
    U, W = HorizontalLift((one, zero)), HorizontalLift((zero, one))
    want = SPHERE.bracket_numeric(U, W, q)
    lift = SPHERE.curvature_lift([1, 0], [0, 1], q)
    assert np.max(np.abs(lift)) > 0.1
    np.testing.assert_allclose(want, SPHERE.horizontal_lift([0, 0], q) + lift, atol=1e-12)


def test_mixed_generic_field_has_no_closed_form():
    d = random_draw(SPHERE, np.random.default_rng(5))
    generic = SPHERE.bracket_field(d.H[0], d.V[0])
    with pytest.raises(BracketKindError):
        SPHERE.bracket_closed(generic, d.H[1], d.q)


@pytest.mark.parametrize("tb", [SPHERE, HYPER], ids=ids)
def test_jacobi_identity(tb):
    d = random_draw(tb, np.random.default_rng(6))
    A, B, C = d.H[0], d.V[0], d.H[1]
    br = tb.bracket_field
    total = (tb.at(br(A, br(B, C)), d.q) + tb.at(br(B, br(C, A)), d.q) + tb.at(br(C, br(A, B)), d.q))
    assert np.max(np.abs(total)) < 1e-4


def test_bracket_from_jets_matches_symbolic():
    d = random_draw(HYPER, np.random.default_rng(7))
    u, Ju = HYPER.jet(d.H[0], d.q)
    w, Jw = HYPER.jet(d.V[1], d.q)
    np.testing.assert_allclose(bracket_from_jets(u, Ju, w, Jw), HYPER.bracket_numeric(d.H[0], d.V[1], d.q),
                               atol=1e-13)


def test_shape_errors():
    q = SPHERE.point([1.0, 1.0])
    with pytest.raises(ValueError):
        SPHERE.vertical_lift(np.eye(3), q)
    with pytest.raises(ValueError):
        SPHERE.horizontal_lift([1.0], q)
    with pytest.raises(ValueError):
        SPHERE.point([1.0, 1.0], np.eye(3))
    with pytest.raises(ValueError):
        SPHERE.at(VerticalLift(((ex.ONE,),)), q)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=4, max_size=4), st.floats(0.4, 2.7))
def test_horizontal_lift_linear_in_vector(tvals, th):
    q = SPHERE.point([th, 0.0], np.array(tvals).reshape(2, 2))
    a = SPHERE.horizontal_lift([1.0, 0.0], q)
    b = SPHERE.horizontal_lift([0.0, 1.0], q)
    np.testing.assert_allclose(SPHERE.horizontal_lift([2.0, -3.0], q), 2 * a - 3 * b, atol=1e-12)
