import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from morbit.billiard import OrientedLine
from morbit.cli import billiard_sequence
from morbit.genfun import ChordGF, DirectionGF, FourierPotential, StandardMapGF, standard_map_orbit
from morbit.geometry import Ellipsoid
from morbit.variational import (MonotonicityError, NonCriticalError, NotMorbitError, action_sum,
                                assemble_window, classify_orbit, classify_window, hereditary_check,
                                jacobi_propagate, limit_X, mackay_identity_check, periodic_limit_X,
                                reconstruct_jacobi, required_length, riccati_sequence,
                                second_variation)

COS3 = FourierPotential(0.0, cos=(0.0, 0.0, 1.0))


def axis_window(gf, point, direction, steps=60):
    seq = billiard_sequence(gf.body, OrientedLine(np.array(point, float), np.array(direction, float)),
                            steps, period=2)
    return assemble_window(gf, gf.config(seq))


def standard_window(q, p, steps=30, V=None):
    V = V or FourierPotential(0.0, cos=(0.4,), sin=(0.0, 0.1))
    return assemble_window(StandardMapGF(V), standard_map_orbit(V, q, p, steps))


def test_circle_blocks():
    w = axis_window(ChordGF(Ellipsoid([1.0, 1.0])), [1.0, 0.0], [-1.0, 0.0])
    assert np.allclose(w.a[1:-1], -1.0)
    assert np.allclose(np.abs(w.b), 0.5)
    W = second_variation(w, 1, 4)
    assert W.shape == (4, 4) and np.allclose(W, W.T)


def test_ellipse_axis_blocks_in_both_charts():
    E = Ellipsoid([2.0, 1.0])
    assert axis_window(ChordGF(E), [2.0, 0.0], [-1.0, 0.0]).a[1][0, 0] == pytest.approx(-3.5, abs=1e-12)
    assert axis_window(ChordGF(E), [0.0, 1.0], [0.0, -1.0]).a[1][0, 0] == pytest.approx(0.5, abs=1e-12)
    assert axis_window(DirectionGF(E), [0.0, 1.0], [0.0, -1.0]).a[1][0, 0] == pytest.approx(2.0, abs=1e-12)


def test_non_critical_configuration_is_refused():
    config = [-2 * math.pi * n / 3 for n in range(8)]
    config[3] += 1e-3
    with pytest.raises(NonCriticalError):
        assemble_window(StandardMapGF(COS3), config)


def test_action_gradient_vanishes_on_orbits():
    V = FourierPotential(0.0, cos=(0.4,))
    F, grad = action_sum(StandardMapGF(V), standard_map_orbit(V, 0.3, 1.1, 10))
    assert np.isfinite(F) and np.abs(grad).max() < 1e-12


@given(st.floats(0, 2 * math.pi), st.floats(-3, 3), st.integers(1, 15))
def test_riccati_pivots_give_the_determinant(q, p, size):
    w = standard_window(q, p).sub(3, 2 + size)
    tr = riccati_sequence(w, 3)
    if tr.singular_at is not None or max(abs(np.linalg.det(A)) for A in tr.A) > 1e6:
        return
    sign, logdet = np.linalg.slogdet(second_variation(w))
    piv = np.array([np.linalg.det(A) for A in tr.A])
    assert sign == np.prod(np.sign(piv))
    assert logdet == pytest.approx(np.log(np.abs(piv)).sum(), abs=1e-8)


@given(st.floats(0, 2 * math.pi), st.floats(-3, 3), st.integers(1, 15), st.integers(0, 2**31 - 1))
def test_quadratic_form_identity(q, p, size, seed):
    w = standard_window(q, p).sub(2, 1 + size)
    tr = riccati_sequence(w, 2)
    if tr.singular_at is not None or max(np.linalg.cond(A) for A in tr.A) > 1e8:
        return
    u = np.random.default_rng(seed).normal(size=size)
    assert mackay_identity_check(w, tr, u) < 1e-10 * (u @ u) * max(1.0, np.abs(tr.A).max())


@given(st.floats(0, 2 * math.pi), st.floats(-3, 3))
def test_jacobi_field_and_riccati_agree(q, p):
    w = standard_window(q, p)
    jt = jacobi_propagate(w, 2, 12)
    tr = riccati_sequence(w, 2, 12)
    assert jt.residual < 1e-12
    if tr.singular_at is None and max(np.linalg.cond(A) for A in tr.A) < 1e6:
        for n in range(2, 12):
            # A_n = -b_n xi_{n+1} xi_n^{-1}
            A = -w.b[n] @ jt.at(n + 1) @ np.linalg.inv(jt.at(n))
            assert np.allclose(A, tr.at(n), rtol=1e-6, atol=1e-6)


def test_subwindows_of_a_definite_window_are_definite():
    w = axis_window(ChordGF(Ellipsoid([2.0, 1.0])), [2.0, 0.0], [-1.0, 0.0]).sub(1, 8)
    assert all(v.negdef for _, v in hereditary_check(w))
    assert len(hereditary_check(w)) == 8 * 9 // 2 - 1


def test_standard_map_periodic_limit_closed_form():
    config = [-2 * math.pi * n / 3 for n in range(40)]
    w = assemble_window(StandardMapGF(COS3), config).negated()
    X = periodic_limit_X(w, 20, 3)[0, 0]
    # X = a - b^2/X with a = -7, b = -1
    assert X == pytest.approx(-(7 + 3 * math.sqrt(5)) / 2, abs=1e-12)


def test_circle_periodic_limit_is_parabolic_fixed_point():
    w = axis_window(ChordGF(Ellipsoid([1.0, 1.0])), [1.0, 0.0], [-1.0, 0.0])
    assert periodic_limit_X(w, 30, 2)[0, 0] == pytest.approx(-0.5, abs=1e-9)


def test_limit_converges_on_major_axis():
    w = axis_window(ChordGF(Ellipsoid([2.0, 1.0])), [2.0, 0.0], [-1.0, 0.0], steps=120).sub(90, 110)
    rep = limit_X(w, (10, 20, 40, 80))
    assert rep.converged and rep.monotone_ok
    assert np.all(rep.X < 0)
    assert rep.X[0, 0, 0] == pytest.approx(periodic_limit_X(w, 90, 2)[0, 0], abs=1e-9)
    jf = reconstruct_jacobi(w, rep.X)
    assert jf.jacobi_residual < 1e-12 and jf.x_residual < 1e-12


def test_limit_refuses_minor_axis():
    w = axis_window(ChordGF(Ellipsoid([2.0, 1.0])), [0.0, 1.0], [0.0, -1.0]).sub(30, 40)
    with pytest.raises(NotMorbitError):
        limit_X(w, (10, 20))


def test_monotonicity_violation_is_detected(monkeypatch):
    from morbit import variational
    assert variational._monotone_violation(np.array([[-1.0]]), np.array([[-2.0]]), 1e-9, 1e-9) == 1.0
    assert variational._monotone_violation(np.array([[-2.0]]), np.array([[-1.0]]), 1e-9, 1e-9) == 0.0
    assert variational._monotone_violation(np.array([[-1.0]]), np.array([[-1.0 - 1e-12]]), 1e-9, 1e-9) == 0.0
    # the update is order preserving on NegDef traces, so a violation only
    # shows up when a trace is corrupted; swap the depth order to force one
    w = axis_window(ChordGF(Ellipsoid([2.0, 1.0])), [2.0, 0.0], [-1.0, 0.0]).sub(30, 40)
    real = variational.riccati_sequence
    monkeypatch.setattr(variational, "riccati_sequence",
                        lambda win, k, *a: real(win, 40 - k if k < 20 else k, *a))
    with pytest.raises(MonotonicityError):
        limit_X(w, (10, 20))


def test_classification_of_ellipse_axes():
    E = Ellipsoid([2.0, 1.0])
    for gf in (ChordGF(E), DirectionGF(E)):
        major = classify_window(axis_window(gf, [2.0, 0.0], [-1.0, 0.0]), (5, 10), (10, 20), period=2)
        minor = classify_window(axis_window(gf, [0.0, 1.0], [0.0, -1.0]), (5, 10), (10, 20), period=2)
        assert major.verdict == "m-orbit" and major.certificate.periodic
        assert major.certificate.min_margin > 0
        assert minor.verdict == "rejected" and minor.witness["window"][0] == minor.M


def test_minimizing_sense_on_standard_map():
    config = [-2 * math.pi * n / 3 for n in range(60)]
    cl = classify_orbit(StandardMapGF(COS3), config, (5, 10), (10, 20), sense="minimizing", period=3)
    assert cl.verdict == "m-orbit"
    assert cl.certificate.X[0, 0, 0] == pytest.approx((7 + 3 * math.sqrt(5)) / 2, abs=1e-12)
    rep = cl.report("sm", "standard")
    assert rep["sense"] == "minimizing" and rep["certificate"]["converged"]
    with pytest.raises(ValueError):
        classify_orbit(StandardMapGF(COS3), config, sense="sideways")


def test_rotating_frames_keeps_the_spectrum():
    E = Ellipsoid([1.5, 1.2, 1.0])
    gf = ChordGF(E)
    seq = billiard_sequence(E, OrientedLine(np.array([1.5, 0.0, 0.0]), np.array([-1.0, 0.0, 0.0])), 12, period=2)
    w = assemble_window(gf, gf.config(seq))
    rng = np.random.default_rng(0)
    Qs = np.array([np.linalg.qr(rng.normal(size=(2, 2)))[0] for _ in range(len(w.a))])
    lam = np.linalg.eigvalsh(second_variation(w))
    assert np.allclose(np.linalg.eigvalsh(second_variation(w.rotated(Qs))), lam)


def test_required_length():
    assert required_length((20,), (10, 20, 40, 80)) == 100
