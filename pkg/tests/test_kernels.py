"""Closed-form prism integrals against independent checks.

The frozen reference numbers were produced by adaptive tensor
Gauss-Legendre quadrature of the defining integrals at rel. tol 1e-12;
the remaining tests use finite differences, symmetry, and the dipole
far field, none of which share code with the corner-sum formulas.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from boxmag.geometry import Box
from boxmag.kernels import (EdgeEvaluationError, KERNEL_CONVENTION,
                            PrismPotentialTable, ball_dipole_potential,
                            ball_volume, grad_newton, newton_constant,
                            newton_kernel, on_edge, prism_grad_newton_integral,
                            prism_newton_integral, prism_potential)

BOX = Box((-0.3, -0.2, -0.4), (0.5, 0.6, 0.1))


def test_newton_kernel_values():
    assert newton_constant() == pytest.approx(4.0 * math.pi)
    x = np.array([2.0, 0.0, 0.0])
    assert newton_kernel(x) == pytest.approx(1.0 / (8.0 * math.pi))
    g = grad_newton(x)
    assert np.allclose(g, [-1.0 / (16.0 * math.pi), 0.0, 0.0])


def test_newton_kernel_rejects_origin():
    with pytest.raises(ValueError):
        newton_kernel(np.zeros(3))
    with pytest.raises(ValueError):
        grad_newton(np.zeros(3))


def test_prism_integral_frozen_value():
    # quadrature reference 0.20805778178801... for this box/point pair
    val = prism_newton_integral(BOX, (1.1, 0.7, 0.9))
    assert val == pytest.approx(0.20805778178801126, rel=1e-12)


def test_prism_integral_far_field():
    # Phi(x) -> vol / |x| far away
    x = np.array([40.0, -25.0, 31.0])
    val = prism_newton_integral(BOX, x)
    ref = BOX.volume / np.linalg.norm(x - BOX.center)
    assert val == pytest.approx(ref, rel=1e-3)


def test_prism_integral_symmetry():
    cube = Box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
    p = np.array([0.8, 0.3, -1.1])
    v = prism_newton_integral(cube, p)
    assert prism_newton_integral(cube, -p) == pytest.approx(v, rel=1e-14)
    assert prism_newton_integral(cube, p[[1, 0, 2]]) == pytest.approx(v, rel=1e-14)


def test_gradient_matches_finite_differences():
    p = np.array([0.9, -0.4, 0.35])
    g = prism_grad_newton_integral(BOX, p)
    h = 1e-5
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        fd = (prism_newton_integral(BOX, p + e) - prism_newton_integral(BOX, p - e)) / (2 * h)
        assert g[axis] == pytest.approx(fd, rel=1e-7, abs=1e-12)


@given(st.floats(0.6, 3.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
@settings(max_examples=30)
def test_gradient_finite_difference_property(x, y, z):
    cube = Box((-0.25, -0.25, -0.25), (0.25, 0.25, 0.25))
    p = np.array([x, y, z])
    g = prism_grad_newton_integral(cube, p)
    h = 1e-5
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = h
        fd = (prism_newton_integral(cube, p + e) - prism_newton_integral(cube, p - e)) / (2 * h)
        assert g[axis] == pytest.approx(fd, rel=5e-7, abs=1e-10)


def test_potential_frozen_dipole_limit():
    cube = Box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))
    val = prism_potential(cube, (0.0, 0.0, 1.0), (0.0, 0.0, 10.0))
    assert val == pytest.approx(-0.0007957689213014619, rel=1e-12)
    # and the point-dipole limit it approaches: -1/(400 pi)
    assert val == pytest.approx(-1.0 / (400.0 * math.pi), rel=1e-3)


def test_potential_is_linear_in_magnetization():
    m1, m2 = np.array([1.0, -2.0, 0.5]), np.array([0.0, 1.0, 1.0])
    x = (1.2, 0.9, -0.8)
    a = prism_potential(BOX, m1, x)
    b = prism_potential(BOX, m2, x)
    both = prism_potential(BOX, m1 + m2, x)
    assert both == pytest.approx(a + b, rel=1e-13)


def test_potential_vectorized_points():
    pts = np.array([[1.2, 0.9, -0.8], [2.0, 0.0, 0.0], [-1.0, -1.0, -1.0]])
    vals = prism_potential(BOX, (1.0, 0.0, 0.0), pts)
    assert vals.shape == (3,)
    for i, p in enumerate(pts):
        assert vals[i] == prism_potential(BOX, (1.0, 0.0, 0.0), p)


# ---------------------------------------------------------------------------
# evaluation near and on the singular set


def test_face_point_is_finite():
    # a point on a face (one coordinate plane only) has a finite value
    v = prism_newton_integral(BOX, (0.5, 0.1, -0.2))
    assert np.isfinite(v) and v > 0


def test_edge_point_raises():
    assert on_edge(BOX, (0.5, 0.6, -0.2))  # two face planes meet here
    with pytest.raises(EdgeEvaluationError):
        prism_newton_integral(BOX, (0.5, 0.6, -0.2))
    with pytest.raises(EdgeEvaluationError):
        prism_grad_newton_integral(BOX, (0.5, 0.6, 0.1))  # corner


def test_edge_line_extension_is_fine():
    # the continuation of an edge line outside the closed box is regular
    assert not on_edge(BOX, (0.5, 0.6, 5.0))
    assert np.isfinite(prism_newton_integral(BOX, (0.5, 0.6, 5.0)))


def test_point_inside_box_is_finite():
    # the Newtonian potential is defined (and smooth) inside the source
    v = prism_newton_integral(BOX, (0.0, 0.1, -0.1))
    assert np.isfinite(v) and v > 0


def test_near_plane_extension_accuracy():
    # just off an extended face plane: the naive log argument nearly
    # cancels; the guarded form must stay close to the safe-side value
    base = np.array([0.5001, 0.6001, -3.0])
    v1 = prism_newton_integral(BOX, base)
    v2 = prism_newton_integral(BOX, base + np.array([1e-9, 1e-9, 0.0]))
    assert v1 == pytest.approx(v2, rel=1e-6)


def test_table_matches_functions():
    t = PrismPotentialTable(BOX)
    p = np.array([1.3, -0.7, 0.6])
    assert t.phi(p) == prism_newton_integral(BOX, p)
    assert np.array_equal(t.grad_phi(p), prism_grad_newton_integral(BOX, p))
    m = (0.2, -0.5, 1.0)
    assert t.potential(m, p) == prism_potential(BOX, m, p)


# ---------------------------------------------------------------------------
# ball dipole


def test_ball_dipole_value():
    r, v = 0.3, np.array([0.0, 0.0, 2.0])
    x = np.array([0.0, 0.0, 1.5])
    # -(r^3/3)(v.x)/|x|^3
    expect = -(r ** 3 / 3.0) * 3.0 / 1.5 ** 3
    assert ball_dipole_potential(r, v, x) == pytest.approx(expect, rel=1e-14)
    assert ball_volume(r) == pytest.approx(4.0 / 3.0 * math.pi * r ** 3)


def test_ball_dipole_rejects_interior():
    with pytest.raises(ValueError):
        ball_dipole_potential(1.0, (0.0, 0.0, 1.0), (0.5, 0.0, 0.0))
    with pytest.raises(ValueError):
        ball_dipole_potential(1.0, (0.0, 0.0, 1.0), (1.0, 0.0, 0.0))


def test_convention_string_is_stable():
    assert "4 pi" in KERNEL_CONVENTION
