"""Newton kernel and closed-form potentials of uniformly magnetized boxes.

Conventions used throughout the package: the Newton kernel is
``N(z) = 1 / (C_d |z|^(d-2))`` with ``C_d = (d-2) omega_d`` and ``omega_d``
the surface measure of the unit sphere in R^d, so that

    grad N(z) = ((2 - d) / C_d) z / |z|^d,

which in three dimensions is ``-z / (4 pi |z|^3)``.  The scalar potential of
a magnetization f is ``P(f)(x) = int grad N(x - y) . f(y) dy``.  A box B
with constant moment density m therefore contributes

    P(x) = (1 / (4 pi)) m . grad Phi_B(x),   Phi_B(x) = int_B |x - y|^(-1) dy,

and Phi_B has a classical closed form: with corner offsets
``(X, Y, Z) = corner - x`` and ``r = |(X, Y, Z)|``,

    Phi_B(x)      =  sum_c s_c F(X_c, Y_c, Z_c),
    grad Phi_B(x) = -sum_c s_c (Fx, Fy, Fz)(X_c, Y_c, Z_c),

where the sum runs over the eight corners with alternating sign ``s_c``
(+1 when all three corner coordinates are upper bounds) and

    F  = x y log(z + r) + y z log(x + r) + z x log(y + r)
         - x^2/2 atan(y z / (x r)) - y^2/2 atan(x z / (y r)) - z^2/2 atan(x y / (z r)),
    Fx = y log(z + r) + z log(y + r) - x atan(y z / (x r))     (Fy, Fz cyclic).

The per-corner terms Fx, Fy, Fz are not the pointwise partial derivatives
of F — they differ by terms that cancel in the alternating corner sum — so
they are only ever used in corner-sum form.  Evaluation exactly on a box
edge or corner is rejected (the closed form degenerates there); everywhere
else the individual log/atan terms are guarded so the formulas remain
finite on face planes and on the extensions of edge lines.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .geometry import Box

__all__ = [
    "EdgeEvaluationError",
    "unit_sphere_area",
    "newton_constant",
    "newton_kernel",
    "grad_newton",
    "prism_newton_integral",
    "prism_grad_newton_integral",
    "prism_potential",
    "PrismPotentialTable",
    "ball_volume",
    "ball_dipole_potential",
    "KERNEL_CONVENTION",
]

# recorded in exported matrix sidecars so downstream consumers know the sign
KERNEL_CONVENTION = "gradN(z)=((2-d)/C_d) z/|z|^d; d=3: -z/(4 pi |z|^3)"


class EdgeEvaluationError(ValueError):
    """Raised when a closed-form prism potential is evaluated on an edge/corner."""


def unit_sphere_area(d: int = 3) -> float:
    """Surface measure omega_d of the unit sphere in R^d."""
    if d < 3:
        raise ValueError("kernel defined for d >= 3")
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def newton_constant(d: int = 3) -> float:
    """Normalizing constant C_d = (d - 2) omega_d (equals 4 pi for d = 3)."""
    return (d - 2) * unit_sphere_area(d)


def _norms(x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(x * x, axis=-1))


def newton_kernel(x, d: int = 3) -> np.ndarray | float:
    """N(x) = 1 / (C_d |x|^(d-2)); rejects |x| = 0."""
    x = np.asarray(x, dtype=float)
    r = _norms(x)
    if np.any(r == 0.0):
        raise ValueError("Newton kernel is singular at the origin")
    out = 1.0 / (newton_constant(d) * r ** (d - 2))
    return out if out.ndim else float(out)


def grad_newton(x, d: int = 3) -> np.ndarray:
    """grad N(x) = ((2 - d) / C_d) x / |x|^d; rejects |x| = 0."""
    x = np.asarray(x, dtype=float)
    r = _norms(x)
    if np.any(r == 0.0):
        raise ValueError("Newton kernel is singular at the origin")
    return ((2 - d) / newton_constant(d)) * x / (r ** d)[..., None]


# ---------------------------------------------------------------------------
# closed form for a rectangular box
# ---------------------------------------------------------------------------

def _guarded_log(t: np.ndarray, r: np.ndarray, rho2: np.ndarray) -> np.ndarray:
    """log(t + r) computed stably.

    For t < 0 the direct expression loses digits (t + r -> 0 near the
    negative axis), so the identity t + r = rho2 / (r - t) with
    rho2 = r^2 - t^2 (supplied exactly as the sum of the two squared
    transverse coordinates) is used instead.  Where rho2 == 0 and t <= 0
    the log diverges; callers only use those entries with a vanishing
    coefficient, so any value may stand there — 0 is written to keep the
    arrays NaN-free.
    """
    neg = t < 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(neg, np.log(rho2) - np.log(r - t), np.log(t + r))
    bad = (rho2 == 0.0) & (t <= 0.0)
    if np.any(bad):
        out = np.where(bad, 0.0, out)
    return out


def _guarded_atan(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """atan(num / den) with the convention 0 where den == 0.

    The single place this is used multiplies the result by the coordinate
    that vanishes exactly when den does, so the substituted value only has
    to be finite.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.arctan(num / den)
    zero = den == 0.0
    if np.any(zero):
        out = np.where(zero, 0.0, out)
    return out


def corner_gradient_terms(X: np.ndarray, Y: np.ndarray, Z: np.ndarray):
    """Per-corner terms (Fx, Fy, Fz) of the gradient closed form.

    Valid only when combined over the eight corners with alternating
    signs; see the module docstring.  Inputs are broadcastable arrays of
    corner offsets ``corner - x``.
    """
    X, Y, Z = np.broadcast_arrays(X, Y, Z)
    x2, y2, z2 = X * X, Y * Y, Z * Z
    r = np.sqrt(x2 + y2 + z2)
    lx = _guarded_log(X, r, y2 + z2)
    ly = _guarded_log(Y, r, x2 + z2)
    lz = _guarded_log(Z, r, x2 + y2)
    fx = Y * lz + Z * ly - X * _guarded_atan(Y * Z, X * r)
    fy = X * lz + Z * lx - Y * _guarded_atan(X * Z, Y * r)
    fz = X * ly + Y * lx - Z * _guarded_atan(X * Y, Z * r)
    return fx, fy, fz


def _corner_value_term(X: np.ndarray, Y: np.ndarray, Z: np.ndarray) -> np.ndarray:
    """Per-corner term F of the box Newton integral (corner-sum form)."""
    X, Y, Z = np.broadcast_arrays(X, Y, Z)
    x2, y2, z2 = X * X, Y * Y, Z * Z
    r = np.sqrt(x2 + y2 + z2)
    lx = _guarded_log(X, r, y2 + z2)
    ly = _guarded_log(Y, r, x2 + z2)
    lz = _guarded_log(Z, r, x2 + y2)
    out = X * Y * lz + Y * Z * lx + Z * X * ly
    out -= 0.5 * x2 * _guarded_atan(Y * Z, X * r)
    out -= 0.5 * y2 * _guarded_atan(X * Z, Y * r)
    out -= 0.5 * z2 * _guarded_atan(X * Y, Z * r)
    return out


def on_edge(box: Box, x) -> np.ndarray | bool:
    """True where a point lies exactly on an edge or corner of the box.

    That is: at least two coordinates coincide exactly with face planes
    while the point lies in the closed box.  Points on the extension of an
    edge line outside the box are not flagged (the guarded closed form is
    finite and correct there).
    """
    x = np.asarray(x, dtype=float)
    lo, hi = box.arrays()
    on_plane = (x == lo) | (x == hi)
    inside = (x >= lo) & (x <= hi)
    hit = (np.sum(on_plane, axis=-1) >= 2) & np.all(inside, axis=-1)
    return hit if hit.ndim else bool(hit)


def _corner_offsets(box: Box, x: np.ndarray):
    """Offsets corner - x per axis: pairs (lo_a - x_a, hi_a - x_a)."""
    lo, hi = box.arrays()
    return [(lo[a] - x[..., a], hi[a] - x[..., a]) for a in range(3)]


def _check_off_edges(box: Box, x: np.ndarray) -> None:
    hit = on_edge(box, x)
    if np.any(hit):
        raise EdgeEvaluationError(
            f"evaluation point lies exactly on an edge/corner of box {box.lo}..{box.hi}")


def prism_newton_integral(box: Box, x) -> np.ndarray | float:
    """Phi_B(x) = int_B |x - y|^(-1) dy by the eight-corner closed form."""
    x = np.asarray(x, dtype=float)
    _check_off_edges(box, x)
    (X0, X1), (Y0, Y1), (Z0, Z1) = _corner_offsets(box, x)
    total = 0.0
    for i, X in enumerate((X0, X1)):
        for j, Y in enumerate((Y0, Y1)):
            for k, Z in enumerate((Z0, Z1)):
                # +1 at the all-upper corner, alternating: (-1)^(number of lower bounds)
                s = 1.0 if (i + j + k) % 2 == 1 else -1.0
                total = total + s * _corner_value_term(np.asarray(X), np.asarray(Y), np.asarray(Z))
    return total if np.ndim(total) else float(total)


def prism_grad_newton_integral(box: Box, x) -> np.ndarray:
    """grad_x Phi_B(x), shape ``(..., 3)``."""
    x = np.asarray(x, dtype=float)
    _check_off_edges(box, x)
    (X0, X1), (Y0, Y1), (Z0, Z1) = _corner_offsets(box, x)
    gx = gy = gz = 0.0
    for i, X in enumerate((X0, X1)):
        for j, Y in enumerate((Y0, Y1)):
            for k, Z in enumerate((Z0, Z1)):
                # grad Phi = -sum_c s_c (Fx,Fy,Fz); fold the minus into s
                s = -1.0 if (i + j + k) % 2 == 1 else 1.0
                fx, fy, fz = corner_gradient_terms(np.asarray(X), np.asarray(Y), np.asarray(Z))
                gx = gx + s * fx
                gy = gy + s * fy
                gz = gz + s * fz
    return np.stack([np.asarray(gx), np.asarray(gy), np.asarray(gz)], axis=-1)


def prism_potential(box: Box, m, x) -> np.ndarray | float:
    """Potential at x of the box magnetized with constant moment density m.

    ``P(x) = (1/(4 pi)) m . grad Phi_B(x)``; defined off the closed edges
    of the box (faces are fine, edges/corners raise).
    """
    m = np.asarray(m, dtype=float)
    g = prism_grad_newton_integral(box, x)
    out = g @ m / (4.0 * math.pi)
    return out if np.ndim(out) else float(out)


class PrismPotentialTable:
    """Per-box evaluator bundling Phi_B, grad Phi_B and the potential."""

    def __init__(self, box: Box):
        self.box = box

    def phi(self, x):
        return prism_newton_integral(self.box, x)

    def grad_phi(self, x):
        return prism_grad_newton_integral(self.box, x)

    def potential(self, m, x):
        return prism_potential(self.box, m, x)


# ---------------------------------------------------------------------------
# balls
# ---------------------------------------------------------------------------

def ball_volume(r: float, d: int = 3) -> float:
    return unit_sphere_area(d) * r**d / d


def ball_dipole_potential(r: float, v, x, d: int = 3) -> np.ndarray | float:
    """Exterior potential of a uniformly magnetized ball of radius r at 0.

    By the mean-value property of the harmonic kernel the ball acts as a
    point dipole of moment vol(B_r) v:

        P(x) = vol(B_r) v . grad N(x) = -(r^d / d) (v . x) / |x|^d,

    valid for |x| > r (evaluation inside or on the sphere is rejected).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(_norms(x) <= r):
        raise ValueError("dipole closed form is exterior-only (|x| > r)")
    out = ball_volume(r, d) * (grad_newton(x, d) @ v)
    return out if np.ndim(out) else float(out)
