import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from morbit.billiard import OrientedLine, orbit, sample_line
from morbit.cli import billiard_sequence
from morbit.genfun import ChordGF, DirectionGF, FourierPotential, StandardMapGF, pair_sampler
from morbit.geometry import Ellipsoid, SupportCurve2D
from morbit.symplectic import (LagrangianGraph, LagrangianSubspace, TransversalityError, alpha_beta,
                               chart_jacobian_fd, check_morbit_geometric, dT_blocks, graph_over_vertical,
                               homotopy_persistence, index_form, omega, omega_matrix, order_compare,
                               symplectic_defect)
from morbit.variational import assemble_window, classify_window

seeds = st.integers(0, 2**31 - 1)
entries = st.floats(-3, 3, allow_nan=False)


@st.composite
def sym(draw, r):
    A = draw(arrays(float, (r, r), elements=entries))
    return 0.5 * (A + A.T)


def test_omega_convention():
    # omega((q1,p1),(q2,p2)) = <p1,q2> - <q1,p2>
    assert omega([1.0, 0.0], [0.0, 1.0]) == -1.0
    v, w = np.array([1.0, 2.0, 3.0, 4.0]), np.array([-1.0, 0.5, 2.0, 1.0])
    assert omega(v, w) == pytest.approx(v @ omega_matrix(2) @ w)
    assert not omega_matrix(2).flags.writeable


def test_standard_map_differential():
    V = FourierPotential(0.0, cos=(0.0, 0.0, 1.0))
    T = dT_blocks(StandardMapGF(V), 0.0, -2 * math.pi / 3)
    assert np.allclose(T, [[-8.0, -1.0], [9.0, 1.0]])
    assert np.allclose(dT_blocks(StandardMapGF(FourierPotential()), 0.0, 0.5), [[1.0, -1.0], [0.0, 1.0]])


@pytest.mark.parametrize("body", [Ellipsoid([2.0, 1.0]), Ellipsoid([1.5, 1.2, 1.0]),
                                  SupportCurve2D(1.0, cos=[0.0, 0.0, 0.05])])
@pytest.mark.parametrize("make", [ChordGF, DirectionGF])
def test_differential_matches_chart_jacobian(body, make):
    gf = make(body)
    draw = pair_sampler(gf)
    rng = np.random.default_rng(7)
    for _ in range(10):
        q, Q = draw(rng)
        T = dT_blocks(gf, q, Q)
        assert symplectic_defect(T) < 1e-9
        assert np.abs(T - chart_jacobian_fd(gf, q, Q)).max() < 1e-6 * max(1.0, np.abs(T).max())


@given(seeds)
def test_alpha_beta_are_the_generating_function_graphs(seed):
    body = Ellipsoid([1.5, 1.2, 1.0])
    seq = orbit(body, sample_line(body, np.random.default_rng(seed), 0.15), 3)
    if seq.error is not None:
        return
    gf = ChordGF(body)
    x = seq.points
    alpha, beta = alpha_beta(gf, x[0], x[1], x[2])
    assert np.allclose(graph_over_vertical(alpha).W, gf.pack(x[0], x[1]).d22, atol=1e-9)
    assert np.allclose(graph_over_vertical(beta).W, -gf.pack(x[1], x[2]).d11, atol=1e-9)


def test_graph_examples():
    assert np.allclose(graph_over_vertical(LagrangianSubspace.horizontal(2)).W, 0.0)
    assert np.allclose(graph_over_vertical(LagrangianSubspace.graph(np.eye(2))).W, np.eye(2))
    with pytest.raises(TransversalityError):
        graph_over_vertical(LagrangianSubspace.vertical(2))
    with pytest.raises(ValueError):
        LagrangianSubspace(np.eye(4)[:, [0, 2]])
    with pytest.raises(ValueError):
        LagrangianGraph(np.array([[0.0, 1.0], [0.0, 0.0]]))


def test_order_examples():
    G = LagrangianGraph
    assert order_compare(G(np.zeros((1, 1))), G(np.eye(1))) == "less"
    assert order_compare(G(np.eye(1)), G(np.zeros((1, 1)))) == "greater"
    assert order_compare(G(np.diag([1.0, -1.0])), G(np.zeros((2, 2)))) == "neither"
    assert order_compare(G(np.eye(2)), G(np.eye(2))) == "marginal"


@given(st.integers(1, 3).flatmap(lambda r: st.tuples(sym(r), sym(r), sym(r))))
def test_order_is_a_strict_partial_order(triple):
    A, B, C = (LagrangianGraph(M) for M in triple)
    ab, bc, ac = order_compare(A, B), order_compare(B, C), order_compare(A, C)
    if "marginal" in (ab, bc, ac):
        return
    assert (ab == "less") == (order_compare(B, A) == "greater")
    if ab == "less" and bc == "less":
        assert ac == "less"


def test_index_form_examples():
    H, V = LagrangianSubspace.horizontal(1), LagrangianSubspace.vertical(1)
    # alpha = graph 0, beta = graph I, restricted to the vertical: (B - A)^-1 = I
    assert np.allclose(index_form(H, LagrangianSubspace.graph(np.eye(1)), V), [[1.0]])
    Q = index_form(LagrangianSubspace.graph(np.zeros((1, 1))), LagrangianSubspace.graph(np.eye(1)),
                   LagrangianSubspace.graph(0.5 * np.eye(1)))
    # closed form -(T - T S^-1 T) with T = B - W = 1/2, S = B - A = 1, on the unit vector (1, 1/2)/|.|
    assert Q[0, 0] == pytest.approx(-0.25 / 1.25, abs=1e-14)
    with pytest.raises(TransversalityError):
        index_form(V, V, H)


@given(st.integers(1, 3).flatmap(lambda r: st.tuples(sym(r), sym(r))))
def test_index_form_on_vertical_is_inverse_gap(pair):
    A, B = pair
    if abs(np.linalg.det(B - A)) < 1e-3:
        return
    r = A.shape[0]
    Q = index_form(LagrangianSubspace.graph(A), LagrangianSubspace.graph(B), LagrangianSubspace.vertical(r))
    # the vertical basis stays the identity after orthonormalization up to sign
    assert np.allclose(np.abs(Q), np.abs(np.linalg.inv(B - A)), atol=1e-8 * (1 + np.abs(Q).max()))


def test_homotopy_persistence_examples():
    alpha, beta = LagrangianSubspace.horizontal(1), LagrangianSubspace.vertical(1)
    const = [(t, LagrangianSubspace.graph(np.eye(1))) for t in np.linspace(0, 1, 5)]
    alpha2 = LagrangianSubspace.graph(np.zeros((1, 1)))
    beta2 = LagrangianSubspace.graph(2 * np.eye(1))
    rep = homotopy_persistence(alpha2, beta2, [(t, LagrangianSubspace.vertical(1)) for t in (0, 1)])
    assert rep.persistent and rep.samples == 2
    assert homotopy_persistence(beta, alpha, const).persistent in (True, False)
    # rotate the vertical towards alpha = horizontal: graph(1/tan t) reaches alpha at t = pi/2
    path = [(t, LagrangianSubspace(np.array([[math.sin(t)], [math.cos(t)]])))
            for t in np.linspace(0.0, math.pi / 2, 7)]
    rep = homotopy_persistence(alpha2, beta2, path)
    assert not rep.persistent and rep.failure["t"] > 0


def test_geometric_checker_on_ellipse_axes():
    E = Ellipsoid([2.0, 1.0])
    gf = ChordGF(E)
    major = billiard_sequence(E, OrientedLine(np.array([2.0, 0.0]), np.array([-1.0, 0.0])), 40, period=2)
    cfg = gf.config(major)
    cl = classify_window(assemble_window(gf, cfg), (5, 10), (10, 20), period=2)
    rep = check_morbit_geometric(gf, cfg, cl.certificate.X, cl.M)
    assert rep.ok and rep.max_angle < 1e-8
    assert rep.min_margin_alpha > 1e-2 and rep.min_margin_beta > 1e-2
    minor = billiard_sequence(E, OrientedLine(np.array([0.0, 1.0]), np.array([0.0, -1.0])), 40, period=2)
    cfg = gf.config(minor)
    bad = check_morbit_geometric(gf, cfg, [-1e-3 * np.eye(1)] * 10, 5)
    assert not bad.ok and not bad.invariant


def test_geometric_margins_constant_on_circle():
    E = Ellipsoid([1.0, 1.0])
    gf = ChordGF(E)
    # inscribed square, period 4; the periodic limit gives the exact field
    seq = billiard_sequence(E, OrientedLine(np.array([1.0, 0.0]), np.array([-1.0, 1.0])), 60, period=4)
    cfg = gf.config(seq)
    cl = classify_window(assemble_window(gf, cfg), (10,), (10, 20, 40), period=4)
    rep = check_morbit_geometric(gf, cfg, cl.certificate.X, cl.M)
    assert rep.ok
    W = np.array([f[0, 0] for f in rep.fields])
    assert np.ptp(W) < 1e-9
    assert rep.min_margin_alpha == pytest.approx(rep.min_margin_beta, abs=1e-9)
