"""Magnetization field types: box-simple, lattice, smooth, and the
invisibility / non-uniqueness fixtures built from them.

A field here is a compactly supported vector-valued density on R^3.  All
concrete types share a small informal protocol: ``evaluate(points)``
(vectorized, ``(..., 3) -> (..., 3)``), ``net_moment()`` where an exact
closed form exists, and ``support_box()`` giving an axis-aligned bounding
box of the support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import Ball, Box, DOMAIN, Lattice, RigidMotion

__all__ = [
    "FieldParseError",
    "BoxSimpleField",
    "LatticeField",
    "SmoothField",
    "PrismField",
    "NestedBallField",
    "RotatedBoxField",
    "Grain",
    "GrainDecomposition",
    "box_simple",
    "canonicalize",
    "discretize",
    "bump_gradient",
    "invisible_triangle_field",
    "invisible_ball_field",
    "thickness_ambiguity_pair",
    "recover_directions",
    "field_l1_norm",
    "field_to_json",
    "field_from_json",
]


class FieldParseError(ValueError):
    """Malformed or unknown field description."""


def _vec(v) -> tuple[float, float, float]:
    t = tuple(float(c) for c in v)
    if len(t) != 3:
        raise ValueError(f"expected a 3-vector, got length {len(t)}")
    return t


def _pts2d(x) -> tuple[np.ndarray, bool]:
    """Normalize to an (N, 3) batch; report whether the input was a single point."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    return np.atleast_2d(x), single


# ---------------------------------------------------------------------------
# box-simple fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxSimpleField:
    """Finite sum of constant vectors on axis-aligned boxes.

    Parts may overlap; the field value is the sum over all parts containing
    the point.  Every stored part carries a nonzero vector, but the parts
    tuple itself may be empty (the zero field, e.g. after cancellation).
    """

    parts: tuple[tuple[Box, tuple[float, float, float]], ...]

    def __post_init__(self):
        norm = []
        for box, v in self.parts:
            if not isinstance(box, Box):
                raise ValueError("each part must pair a Box with a vector")
            v = _vec(v)
            if v == (0.0, 0.0, 0.0):
                raise ValueError("part vectors must be nonzero (drop zero parts instead)")
            norm.append((box, v))
        object.__setattr__(self, "parts", tuple(norm))

    def evaluate(self, x):
        pts, single = _pts2d(x)
        out = np.zeros_like(pts)
        for box, v in self.parts:
            lo, hi = box.arrays()
            inside = np.all((pts > lo) & (pts < hi), axis=1)
            out[inside] += np.asarray(v)
        return out[0] if single else out

    def net_moment(self) -> np.ndarray:
        m = np.zeros(3)
        for box, v in self.parts:
            m += box.volume * np.asarray(v)
        return m

    def support_box(self) -> Box | None:
        if not self.parts:
            return None
        lo = np.min([b.lo for b, _ in self.parts], axis=0)
        hi = np.max([b.hi for b, _ in self.parts], axis=0)
        return Box(lo, hi)

    def l1_norm(self) -> float:
        """Integral of |f|; computed on the canonical (overlap-free) form."""
        c = canonicalize(self)
        return sum(b.volume * float(np.linalg.norm(v)) for b, v in c.parts)

    def __add__(self, other: "BoxSimpleField") -> "BoxSimpleField":
        return BoxSimpleField(self.parts + other.parts)

    def __neg__(self) -> "BoxSimpleField":
        return BoxSimpleField(tuple((b, tuple(-c for c in v)) for b, v in self.parts))

    def scaled(self, c: float) -> "BoxSimpleField":
        if c == 0.0:
            return BoxSimpleField(())
        return BoxSimpleField(tuple((b, tuple(c * u for u in v)) for b, v in self.parts))


def box_simple(parts: Sequence[tuple]) -> BoxSimpleField:
    """Convenience constructor accepting (lo, hi, v) triples or (Box, v) pairs."""
    out = []
    for p in parts:
        if len(p) == 2:
            out.append((p[0], _vec(p[1])))
        else:
            lo, hi, v = p
            out.append((Box(lo, hi), _vec(v)))
    return BoxSimpleField(tuple(out))


def _overlap_clusters(parts) -> list[list[int]]:
    n = len(parts)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if parts[i][0].intersect(parts[j][0]) is not None:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def canonicalize(f: BoxSimpleField) -> BoxSimpleField:
    """Equivalent field whose boxes have pairwise disjoint interiors.

    Overlapping parts are cut along every face plane occurring in their
    overlap cluster and the vectors summed per fragment; fragments whose
    sum cancels exactly are dropped.  Parts that overlap nothing pass
    through unchanged.
    """
    out: list[tuple[Box, tuple[float, float, float]]] = []
    parts = list(f.parts)
    for cluster in _overlap_clusters(parts):
        if len(cluster) == 1:
            out.append(parts[cluster[0]])
            continue
        boxes = [parts[i][0] for i in cluster]
        vecs = [np.asarray(parts[i][1]) for i in cluster]
        planes = [np.unique(np.concatenate([[b.lo[a] for b in boxes],
                                            [b.hi[a] for b in boxes]]))
                  for a in range(3)]
        los, his = np.array([b.lo for b in boxes]), np.array([b.hi for b in boxes])
        for i in range(len(planes[0]) - 1):
            for j in range(len(planes[1]) - 1):
                for k in range(len(planes[2]) - 1):
                    lo = (planes[0][i], planes[1][j], planes[2][k])
                    hi = (planes[0][i + 1], planes[1][j + 1], planes[2][k + 1])
                    c = 0.5 * (np.asarray(lo) + np.asarray(hi))
                    inside = np.all((los <= c) & (c <= his), axis=1)
                    if not np.any(inside):
                        continue
                    v = np.sum([vecs[m] for m in np.nonzero(inside)[0]], axis=0)
                    if np.any(v != 0.0):
                        out.append((Box(lo, hi), tuple(v)))
    return BoxSimpleField(tuple(out))


# ---------------------------------------------------------------------------
# lattice fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LatticeField:
    """Piecewise-constant field on the lattice cells of the unit cube.

    ``coeffs`` has length ``3 n^3``, blocked per cell in lexicographic cell
    order: entries ``3i .. 3i+2`` are the vector on cell ``i``.
    """

    lattice: Lattice
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.shape != (3 * self.lattice.n_cells,):
            raise ValueError(
                f"coefficient vector must have length {3 * self.lattice.n_cells}, got {c.shape}")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def zeros(cls, lattice: Lattice) -> "LatticeField":
        return cls(lattice, np.zeros(3 * lattice.n_cells))

    def cell_vector(self, flat: int) -> np.ndarray:
        return self.coeffs[3 * flat: 3 * flat + 3]

    def as_cell_matrix(self) -> np.ndarray:
        """Coefficients reshaped to ``(n^3, 3)``."""
        return self.coeffs.reshape(-1, 3)

    def evaluate(self, x):
        pts, single = _pts2d(x)
        n = self.lattice.n
        out = np.zeros_like(pts)
        inside = np.all((pts > -0.5) & (pts < 0.5), axis=1)
        idx = np.floor((pts[inside] + 0.5) * n).astype(int)
        idx = np.clip(idx, 0, n - 1)
        flat = (idx[:, 0] * n + idx[:, 1]) * n + idx[:, 2]
        out[inside] = self.as_cell_matrix()[flat]
        return out[0] if single else out

    def net_moment(self) -> np.ndarray:
        return self.lattice.delta**3 * self.as_cell_matrix().sum(axis=0)

    def support_box(self) -> Box:
        return DOMAIN

    def l1_norm(self) -> float:
        return self.lattice.delta**3 * float(
            np.linalg.norm(self.as_cell_matrix(), axis=1).sum())

    def to_box_simple(self) -> BoxSimpleField:
        """Lossless conversion; cells carrying the zero vector are dropped."""
        parts = []
        mat = self.as_cell_matrix()
        for flat in range(self.lattice.n_cells):
            v = mat[flat]
            if np.any(v != 0.0):
                parts.append((self.lattice.cell_from_flat(flat), tuple(v)))
        return BoxSimpleField(tuple(parts))

    @classmethod
    def from_box_simple(cls, f: BoxSimpleField, lattice: Lattice) -> "LatticeField":
        """Inverse of ``to_box_simple`` for cell-aligned fields."""
        coeffs = np.zeros(3 * lattice.n_cells)
        for box, v in f.parts:
            c = np.asarray(box.center)
            trip = np.floor((c + 0.5) * lattice.n).astype(int)
            trip = np.clip(trip, 0, lattice.n - 1)
            cell = lattice.cell(*trip)
            if cell.lo != box.lo or cell.hi != box.hi:
                raise ValueError(f"part {box.lo}..{box.hi} is not a lattice cell at n={lattice.n}")
            flat = lattice.flat_index(*trip)
            coeffs[3 * flat: 3 * flat + 3] += np.asarray(v)
        return cls(lattice, coeffs)


def discretize(f, lattice: Lattice) -> LatticeField:
    """Midpoint discretization: the cell vector is the field at the cell center."""
    vals = np.asarray(f.evaluate(lattice.centers()), dtype=float)
    return LatticeField(lattice, vals.reshape(-1))


# ---------------------------------------------------------------------------
# smooth fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SmoothField:
    """Field given by a vectorized evaluator with a declared support.

    ``radial_breakpoints`` lists radii (for ball supports) across which the
    field is only piecewise smooth; ``axis_breakpoints`` does the same with
    per-axis coordinate planes for box supports (e.g. where a cutoff starts
    or stops transitioning).  Quadrature splits along them, which turns slow
    edge-chasing refinement into spectral convergence per piece.
    ``descriptor`` optionally carries the JSON description this field was
    built from.
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    support: Box | Ball
    smoothness: str = "smooth"
    radial_breakpoints: tuple[float, ...] = ()
    axis_breakpoints: tuple[tuple[float, ...], tuple[float, ...], tuple[float, ...]] = ((), (), ())
    descriptor: dict | None = None

    def evaluate(self, x):
        pts, single = _pts2d(x)
        out = np.asarray(self.evaluator(pts), dtype=float)
        return out[0] if single else out

    def support_box(self) -> Box:
        if isinstance(self.support, Box):
            return self.support
        c, r = np.asarray(self.support.center), self.support.radius
        return Box(c - r, c + r)


def _bump_scalar(a: float, pts: np.ndarray) -> np.ndarray:
    """The product bump exp(-sum_k 1/(a^2 - x_k^2)) on max|x_k| < a, else 0."""
    pts = np.atleast_2d(pts)
    u = a * a - pts * pts
    inside = np.all(np.abs(pts) < a, axis=1) & np.all(u > 0.0, axis=1)
    out = np.zeros(pts.shape[0])
    if np.any(inside):
        out[inside] = np.exp(-np.sum(1.0 / u[inside], axis=1))
    return out


def bump_gradient(a: float) -> SmoothField:
    """Gradient of the C-infinity product bump supported on [-a, a]^3.

    With ``u_k = a^2 - x_k^2`` the bump is ``f = exp(-sum 1/u_k)`` and

        (grad f)_k = -2 x_k / u_k^2 * f.

    This is the canonical invisible smooth field (a gradient of a compactly
    supported function); its discretizations feed the stability sweep.
    """
    if not a > 0:
        raise ValueError("bump half-width must be positive")
    a = float(a)

    def ev(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros_like(pts)
        u = a * a - pts * pts
        inside = np.all(np.abs(pts) < a, axis=1) & np.all(u > 0.0, axis=1)
        if np.any(inside):
            ui = u[inside]
            g = np.exp(-np.sum(1.0 / ui, axis=1))
            live = g > 0.0  # where the bump has not underflowed, 1/u_k^2 is tame
            rows = np.nonzero(inside)[0][live]
            if rows.size:
                out[rows] = -2.0 * pts[rows] / (u[rows] ** 2) * g[live][:, None]
        return out

    return SmoothField(ev, Box((-a, -a, -a), (a, a, a)),
                       smoothness="c_infinity", descriptor={"type": "bump", "a": a})


# ---------------------------------------------------------------------------
# triangular-prism fields (the exactly invisible four-prism fixture)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TriPrism:
    """Vertical prism: a triangle in the (x1, x2) plane extruded along x3."""

    tri: tuple[tuple[float, float], tuple[float, float], tuple[float, float]]
    zlim: tuple[float, float]

    def __post_init__(self):
        tri = tuple((float(p[0]), float(p[1])) for p in self.tri)
        zlim = (float(self.zlim[0]), float(self.zlim[1]))
        if not zlim[0] < zlim[1]:
            raise ValueError("prism needs z0 < z1")
        object.__setattr__(self, "tri", tri)
        object.__setattr__(self, "zlim", zlim)

    @property
    def area(self) -> float:
        (ax, ay), (bx, by), (cx, cy) = self.tri
        return 0.5 * abs((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))

    @property
    def volume(self) -> float:
        return self.area * (self.zlim[1] - self.zlim[0])


@dataclass(frozen=True)
class PrismField:
    """Sum of constant vectors on vertical triangular prisms."""

    parts: tuple[tuple[TriPrism, tuple[float, float, float]], ...]

    def evaluate(self, x):
        pts, single = _pts2d(x)
        out = np.zeros_like(pts)
        for prism, v in self.parts:
            (ax, ay), (bx, by), (cx, cy) = prism.tri
            px, py = pts[:, 0], pts[:, 1]
            # barycentric sign tests, strict interior
            d1 = (px - bx) * (ay - by) - (ax - bx) * (py - by)
            d2 = (px - cx) * (by - cy) - (bx - cx) * (py - cy)
            d3 = (px - ax) * (cy - ay) - (cx - ax) * (py - ay)
            in_tri = ((d1 > 0) & (d2 > 0) & (d3 > 0)) | ((d1 < 0) & (d2 < 0) & (d3 < 0))
            in_z = (pts[:, 2] > prism.zlim[0]) & (pts[:, 2] < prism.zlim[1])
            out[in_tri & in_z] += np.asarray(v)
        return out[0] if single else out

    def net_moment(self) -> np.ndarray:
        m = np.zeros(3)
        for prism, v in self.parts:
            m += prism.volume * np.asarray(v)
        return m

    def support_box(self) -> Box:
        xs = [p[0] for prism, _ in self.parts for p in prism.tri]
        ys = [p[1] for prism, _ in self.parts for p in prism.tri]
        zs = [z for prism, _ in self.parts for z in prism.zlim]
        return Box((min(xs), min(ys), min(zs)), (max(xs), max(ys), max(zs)))

    def l1_norm(self) -> float:
        return sum(p.volume * float(np.linalg.norm(v)) for p, v in self.parts)


def invisible_triangle_field() -> PrismField:
    """Exactly invisible vortex of four triangular prisms filling [0, 1]^3.

    The unit square splits along its diagonals into bottom/right/top/left
    triangles (each subsequent one the quarter-turn of the previous about
    the center); extruded in x3 and magnetized e1, e2, -e1, -e2 in that
    order the flow circulates: it is divergence-free with vanishing normal
    component on the cube boundary, hence produces zero exterior potential.
    """
    c = (0.5, 0.5)
    bottom = TriPrism(((0, 0), (1, 0), c), (0, 1))
    right = TriPrism(((1, 0), (1, 1), c), (0, 1))
    top = TriPrism(((1, 1), (0, 1), c), (0, 1))
    left = TriPrism(((0, 1), (0, 0), c), (0, 1))
    e1, e2 = (1.0, 0.0, 0.0), (0.0, 1.0, 0.0)
    return PrismField((
        (bottom, e1),
        (right, e2),
        (top, (-1.0, 0.0, 0.0)),
        (left, (0.0, -1.0, 0.0)),
    ))


# ---------------------------------------------------------------------------
# nested-ball fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NestedBallField:
    """Constant vector on a ball, compensated on a concentric inner ball.

    ``f = v`` on the annulus ``alpha r < |y - c| < r`` and
    ``v - v/alpha^3 = v (1 - alpha^{-3})`` on the inner ball, i.e.

        f = v chi_{B_r} - (v / alpha^3) chi_{B_{alpha r}}.

    The inner ball's moment cancels the outer one exactly, and the whole
    field is invisible from outside ``B_r``.
    """

    r: float
    alpha: float
    v: tuple[float, float, float]
    center: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "v", _vec(self.v))
        object.__setattr__(self, "center", _vec(self.center))
        if not self.r > 0:
            raise ValueError("outer radius must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("radius ratio alpha must lie strictly in (0, 1)")
        if self.v == (0.0, 0.0, 0.0):
            raise ValueError("magnetization vector must be nonzero")

    def evaluate(self, x):
        pts, single = _pts2d(x)
        d = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        out = np.zeros_like(pts)
        v = np.asarray(self.v)
        out[d < self.r] += v
        out[d < self.alpha * self.r] -= v / self.alpha**3
        return out[0] if single else out

    def net_moment(self) -> np.ndarray:
        # vol(B_{alpha r}) / alpha^3 == vol(B_r) identically, so the inner
        # ball cancels the outer moment exactly; zero in exact arithmetic.
        return np.zeros(3)

    def support(self) -> Ball:
        return Ball(self.center, self.r)

    def support_box(self) -> Box:
        c, r = np.asarray(self.center), self.r
        return Box(c - r, c + r)

    def l1_norm(self) -> float:
        # |v| vol(B_r) from the outer ball plus |v|/alpha^3 vol(B_alpha r)
        vol = 4.0 / 3.0 * math.pi * self.r**3
        return 2.0 * float(np.linalg.norm(self.v)) * vol

    def translated(self, t) -> "NestedBallField":
        return NestedBallField(self.r, self.alpha, self.v,
                               tuple(c + s for c, s in zip(self.center, _vec(t))))


def invisible_ball_field(r: float, alpha: float, v) -> NestedBallField:
    return NestedBallField(r, alpha, _vec(v))


# ---------------------------------------------------------------------------
# thickness ambiguity: two fields, identical potential, one vanishes on a window
# ---------------------------------------------------------------------------

def _cinf_step(u: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for u <= 0, 1 for u >= 1, e(u)/(e(u)+e(1-u)) between."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    out[u >= 1.0] = 1.0
    mid = (u > 0.0) & (u < 1.0)
    if np.any(mid):
        um = u[mid]
        a = np.exp(-1.0 / um)
        b = np.exp(-1.0 / (1.0 - um))
        out[mid] = a / (a + b)
    return out


def _cinf_step_deriv(u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    mid = (u > 0.0) & (u < 1.0)
    if np.any(mid):
        um = u[mid]
        a = np.exp(-1.0 / um)
        b = np.exp(-1.0 / (1.0 - um))
        out[mid] = a * b * (1.0 / um**2 + 1.0 / (1.0 - um) ** 2) / (a + b) ** 2
    return out


def _plateau(t: np.ndarray, lo: float, hi: float, margin: float):
    """1-D cutoff that is 1 on [lo, hi], 0 outside [lo-margin, hi+margin];
    returns (value, derivative)."""
    up = (t - (lo - margin)) / margin
    down = ((hi + margin) - t) / margin
    val = np.where(t < lo, _cinf_step(up),
                   np.where(t > hi, _cinf_step(down), 1.0))
    der = np.where(t < lo, _cinf_step_deriv(up) / margin,
                   np.where(t > hi, -_cinf_step_deriv(down) / margin, 0.0))
    return val, der


def thickness_ambiguity_pair(window: Box) -> tuple[SmoothField, SmoothField]:
    """Two magnetizations of the unit cube with identical exterior potential,
    the second of which vanishes identically on ``window``.

    The first is the constant field ``f = e1`` (the gradient of x1).  With a
    C-infinity cutoff ``eta`` that is 1 on the window and 0 outside a collar
    at half the window's distance to the cube boundary, ``g = f - grad(eta x1)``
    differs from f by the gradient of a compactly supported function — an
    exactly invisible perturbation — and equals 0 on the window where
    ``eta == 1``.
    """
    wlo, whi = np.asarray(window.lo), np.asarray(window.hi)
    dist = min(float(np.min(wlo - (-0.5))), float(np.min(0.5 - whi)))
    if dist <= 0.0:
        raise ValueError("window must be compactly contained in the open unit cube")
    margin = 0.5 * dist

    e1 = np.array([1.0, 0.0, 0.0])

    def f_ev(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        out = np.zeros_like(pts)
        inside = np.all((pts >= -0.5) & (pts <= 0.5), axis=1)
        out[inside] = e1
        return out

    def g_ev(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = np.empty((3, pts.shape[0]))
        ders = np.empty((3, pts.shape[0]))
        for a in range(3):
            vals[a], ders[a] = _plateau(pts[:, a], window.lo[a], window.hi[a], margin)
        eta = vals[0] * vals[1] * vals[2]
        grad_eta = np.stack([
            ders[0] * vals[1] * vals[2],
            vals[0] * ders[1] * vals[2],
            vals[0] * vals[1] * ders[2],
        ], axis=1)
        out = -pts[:, 0][:, None] * grad_eta
        out[:, 0] += 1.0 - eta
        inside = np.all((pts >= -0.5) & (pts <= 0.5), axis=1)
        out[~inside] = 0.0
        return out

    breaks = tuple(
        tuple(float(b) for b in (window.lo[a] - margin, window.lo[a],
                                 window.hi[a], window.hi[a] + margin))
        for a in range(3))
    f = SmoothField(f_ev, DOMAIN, smoothness="piecewise_constant")
    g = SmoothField(g_ev, DOMAIN, smoothness="piecewise_smooth", axis_breakpoints=breaks)
    return f, g


# ---------------------------------------------------------------------------
# grains and direction recovery
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Grain:
    """A region together with the field restricted to it."""

    region: Box | Ball
    field: object


@dataclass(frozen=True, eq=False)
class GrainDecomposition:
    grains: tuple[Grain, ...]


def field_l1_norm(f) -> float:
    """Integral of |f|, exact where the type allows, quadrature otherwise."""
    if hasattr(f, "l1_norm"):
        return f.l1_norm()
    from .forward import smooth_l1_norm  # deferred: forward imports this module
    return smooth_l1_norm(f)


def net_moment_of(f) -> np.ndarray:
    """Net moment, exact where the type allows, quadrature otherwise."""
    if hasattr(f, "net_moment"):
        return f.net_moment()
    from .forward import net_moment_quadrature
    return net_moment_quadrature(f)


def recover_directions(g: GrainDecomposition, rel_tol: float = 1e-10):
    """Unit magnetization direction per grain, from the grain's net moment.

    For unidirectional grains the direction (and the moment itself) is
    determined by the exterior potential; it is read off as moment/|moment|.
    Grains whose moment is numerically zero relative to the grain's L1 mass
    get None (direction undetermined, e.g. for balanced fields).
    """
    out = []
    for grain in g.grains:
        m = np.asarray(net_moment_of(grain.field), dtype=float)
        scale = field_l1_norm(grain.field)
        nm = float(np.linalg.norm(m))
        if scale == 0.0 or nm <= rel_tol * scale:
            out.append(None)
        else:
            out.append(m / nm)
    return out


# ---------------------------------------------------------------------------
# rigid-motion companion fields
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RotatedBoxField:
    """The motion companion ``f_U(x) = U^T f(U x + t)`` of a box-simple field.

    Kept in implicit form for general rotations (the support is no longer
    axis-aligned); quadrature integrates over the original boxes through
    the change of variables.
    """

    base: BoxSimpleField
    motion: RigidMotion

    def evaluate(self, x):
        pts, single = _pts2d(x)
        vals = self.base.evaluate(self.motion.apply(pts))
        out = vals @ self.motion.mat  # rows v -> U^T v
        return out[0] if single else out

    def net_moment(self) -> np.ndarray:
        return self.motion.mat.T @ self.base.net_moment()

    def support_box(self) -> Box:
        inv = self.motion.inverse()
        sb = self.base.support_box()
        if sb is None:
            return DOMAIN
        lo, hi = sb.arrays()
        pts = np.array([[x, y, z] for x in (lo[0], hi[0])
                        for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
        img = inv.apply(pts)
        return Box(img.min(axis=0), img.max(axis=0))

    def l1_norm(self) -> float:
        return self.base.l1_norm()


# ---------------------------------------------------------------------------
# JSON descriptions
# ---------------------------------------------------------------------------

def field_to_json(f) -> dict:
    if isinstance(f, BoxSimpleField):
        return {"type": "box_simple",
                "parts": [{"lo": list(b.lo), "hi": list(b.hi), "v": list(v)}
                          for b, v in f.parts]}
    if isinstance(f, LatticeField):
        return {"type": "lattice", "n": f.lattice.n, "coeffs": f.coeffs.tolist()}
    if isinstance(f, NestedBallField):
        out = {"type": "nested_balls", "r": f.r, "alpha": f.alpha, "v": list(f.v)}
        if f.center != (0.0, 0.0, 0.0):
            out["center"] = list(f.center)
        return out
    if isinstance(f, SmoothField) and f.descriptor is not None:
        return dict(f.descriptor)
    raise FieldParseError(f"field of type {type(f).__name__} has no JSON description")


def _require(obj: dict, key: str):
    if key not in obj:
        raise FieldParseError(f"field description missing key {key!r}")
    return obj[key]


def field_from_json(obj: dict):
    """Build a field from its JSON description; unknown types are rejected."""
    if not isinstance(obj, dict):
        raise FieldParseError("field description must be a JSON object")
    kind = _require(obj, "type")
    try:
        if kind == "box_simple":
            parts = [(Box(_require(p, "lo"), _require(p, "hi")), _vec(_require(p, "v")))
                     for p in _require(obj, "parts")]
            return BoxSimpleField(tuple(parts))
        if kind == "lattice":
            lattice = Lattice(int(_require(obj, "n")))
            return LatticeField(lattice, np.asarray(_require(obj, "coeffs"), dtype=float))
        if kind == "bump":
            return bump_gradient(float(_require(obj, "a")))
        if kind == "nested_balls":
            return NestedBallField(float(_require(obj, "r")), float(_require(obj, "alpha")),
                                   _vec(_require(obj, "v")),
                                   _vec(obj.get("center", (0.0, 0.0, 0.0))))
    except FieldParseError:
        raise
    except (TypeError, ValueError) as exc:
        raise FieldParseError(f"invalid {kind!r} field description: {exc}") from exc
    raise FieldParseError(f"unknown field type {kind!r}")
