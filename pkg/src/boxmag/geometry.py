"""Axis-aligned geometry: boxes, the unit-cube lattice, boundary grids, rigid motions.

Everything lives in the frame of the unit cube ``Omega = [-1/2, 1/2]^3``.
Boxes are closed axis-aligned products of intervals.  The lattice tiles
Omega into ``n^3`` congruent cells of side ``delta = 1/n``, ordered
lexicographically by their integer triple ``(i, j, k)`` with ``k`` fastest.
Boundary grids carry midpoint sample points on the six faces together with
the quadrature weight ``|dOmega| / M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Box",
    "Ball",
    "Lattice",
    "SurfaceGrid",
    "RigidMotion",
    "DOMAIN",
    "build_lattice",
    "surface_grid",
]


def _as_triple(v) -> tuple[float, float, float]:
    t = tuple(float(c) for c in v)
    if len(t) != 3:
        raise ValueError(f"expected a 3-vector, got length {len(t)}")
    return t


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lo_1, hi_1] x [lo_2, hi_2] x [lo_3, hi_3]``."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_triple(self.lo))
        object.__setattr__(self, "hi", _as_triple(self.hi))
        for a, b in zip(self.lo, self.hi):
            if not a < b:
                raise ValueError(f"box needs lo < hi componentwise, got {self.lo} / {self.hi}")

    @property
    def volume(self) -> float:
        v = 1.0
        for a, b in zip(self.lo, self.hi):
            v *= b - a
        return v

    @property
    def center(self) -> tuple[float, float, float]:
        return tuple(0.5 * (a + b) for a, b in zip(self.lo, self.hi))

    def contains(self, x, strict: bool = False) -> bool:
        """Membership in the closed box, or the open interior if ``strict``."""
        x = _as_triple(x)
        if strict:
            return all(a < c < b for a, c, b in zip(self.lo, x, self.hi))
        return all(a <= c <= b for a, c, b in zip(self.lo, x, self.hi))

    def intersect(self, other: "Box") -> "Box | None":
        """Common interior as a box, or None when interiors are disjoint."""
        lo = tuple(max(a, b) for a, b in zip(self.lo, other.lo))
        hi = tuple(min(a, b) for a, b in zip(self.hi, other.hi))
        if any(a >= b for a, b in zip(lo, hi)):
            return None
        return Box(lo, hi)

    def translate(self, t) -> "Box":
        t = _as_triple(t)
        return Box(tuple(a + s for a, s in zip(self.lo, t)),
                   tuple(b + s for b, s in zip(self.hi, t)))

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.lo), np.array(self.hi)


@dataclass(frozen=True)
class Ball:
    """Closed ball; used as the support descriptor of radially built fields."""

    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_triple(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def volume(self) -> float:
        return 4.0 / 3.0 * math.pi * self.radius**3


DOMAIN = Box((-0.5, -0.5, -0.5), (0.5, 0.5, 0.5))

#: boundary measure |dOmega| of the unit cube
SURFACE_AREA = 6.0


@dataclass(frozen=True)
class Lattice:
    """Regular ``n^3`` tiling of the unit cube with spacing ``delta = 1/n``.

    Cells are indexed either by the integer triple ``(i, j, k)`` with
    ``0 <= i, j, k < n`` or by the flat lexicographic index
    ``(i * n + j) * n + k``; the two are bijective via ``flat_index`` and
    ``triple_index``.  Cell edges are the planes ``j/n - 1/2``, evaluated
    with one fixed expression so that neighbouring cells share face
    coordinates exactly.
    """

    n: int

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and self.n >= 1):
            raise ValueError(f"lattice needs an integer n >= 1, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def delta(self) -> float:
        return 1.0 / self.n

    @property
    def n_cells(self) -> int:
        return self.n**3

    @property
    def edges(self) -> np.ndarray:
        """The ``n + 1`` cell-boundary planes per axis."""
        return np.arange(self.n + 1) / self.n - 0.5

    def flat_index(self, i: int, j: int, k: int) -> int:
        n = self.n
        if not (0 <= i < n and 0 <= j < n and 0 <= k < n):
            raise IndexError(f"cell triple {(i, j, k)} out of range for n={n}")
        return (i * n + j) * n + k

    def triple_index(self, flat: int) -> tuple[int, int, int]:
        n = self.n
        if not 0 <= flat < n**3:
            raise IndexError(f"flat cell index {flat} out of range for n={n}")
        i, rem = divmod(flat, n * n)
        j, k = divmod(rem, n)
        return i, j, k

    def cell(self, i: int, j: int, k: int) -> Box:
        e = self.edges
        return Box((e[i], e[j], e[k]), (e[i + 1], e[j + 1], e[k + 1]))

    def cell_from_flat(self, flat: int) -> Box:
        return self.cell(*self.triple_index(flat))

    def centers(self) -> np.ndarray:
        """All cell centers, shape ``(n^3, 3)``, lexicographic order."""
        c = (np.arange(self.n) + 0.5) / self.n - 0.5
        ci, cj, ck = np.meshgrid(c, c, c, indexing="ij")
        return np.column_stack([ci.ravel(), cj.ravel(), ck.ravel()])


def build_lattice(n: int) -> Lattice:
    return Lattice(n)


def lattice_from_delta(delta: float) -> Lattice:
    """Lattice whose spacing is ``delta``; requires ``1/delta`` integral."""
    if not delta > 0:
        raise ValueError("spacing must be positive")
    n = round(1.0 / delta)
    if n < 1 or abs(n * delta - 1.0) > 1e-12:
        raise ValueError(f"spacing {delta} does not divide 1 as 1/n")
    return Lattice(n)


@dataclass(frozen=True, eq=False)
class SurfaceGrid:
    """Midpoint sample grid on the boundary of the unit cube.

    ``points`` has shape ``(6 k^2, 3)``: each of the six faces carries a
    ``k x k`` grid of (possibly lattice-adjusted) face-cell centers, faces
    ordered ``-x, +x, -y, +y, -z, +z`` and points within a face ordered
    lexicographically by the two tangential axes.  ``weight`` is the
    common quadrature weight ``|dOmega| / M = 1/k^2``.
    """

    points: np.ndarray
    k: int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def weight(self) -> float:
        return SURFACE_AREA / self.n_points

    def min_plane_distance(self, lattice: Lattice) -> float:
        """Smallest tangential distance from any point to any lattice plane."""
        d = np.inf
        planes = lattice.edges
        for axis in range(3):
            tang = [a for a in range(3) if a != axis]
            on_face = np.abs(np.abs(self.points[:, axis]) - 0.5) == 0.0
            for t in tang:
                coords = self.points[on_face, t]
                d = min(d, np.abs(coords[:, None] - planes[None, :]).min())
        return float(d)


def _face_centers(k: int, lattice: Lattice | None) -> np.ndarray:
    """Tangential face-cell center coordinates, shifted off lattice planes.

    A center closer than ``delta/(4k)`` to a lattice plane is moved away
    from that plane by a further ``delta/(2k)``; the result keeps a strict
    ``delta/(4k)`` margin to every plane while staying inside the open
    face (the shift is at most ``3 delta/(4 k) < 1/(2k)``).
    """
    t = (np.arange(k) + 0.5) / k - 0.5
    if lattice is None:
        return t
    planes = lattice.edges
    margin = lattice.delta / (4.0 * k)
    bump = lattice.delta / (2.0 * k)
    out = t.copy()
    for idx, val in enumerate(t):
        dist = val - planes
        j = int(np.argmin(np.abs(dist)))
        e = abs(dist[j])
        if e <= margin:
            away = 1.0 if dist[j] >= 0.0 else -1.0
            out[idx] = planes[j] + away * (e + bump)
    return out


def surface_grid(k: int, lattice: Lattice | None = None) -> SurfaceGrid:
    """Boundary grid with ``6 k^2`` points; pass the target lattice so the
    tangential coordinates avoid its cell-boundary planes."""
    if not (isinstance(k, (int, np.integer)) and k >= 1):
        raise ValueError(f"face resolution k must be an integer >= 1, got {k!r}")
    k = int(k)
    t = _face_centers(k, lattice)
    u, v = np.meshgrid(t, t, indexing="ij")
    uv = np.column_stack([u.ravel(), v.ravel()])
    pts = []
    for axis in range(3):
        tang = [a for a in range(3) if a != axis]
        for sign in (-1.0, 1.0):
            face = np.empty((k * k, 3))
            face[:, axis] = sign * 0.5
            face[:, tang[0]] = uv[:, 0]
            face[:, tang[1]] = uv[:, 1]
            pts.append(face)
    return SurfaceGrid(np.vstack(pts), k)


@dataclass(frozen=True)
class RigidMotion:
    """Euclidean motion ``x -> U x + t`` with orthogonal ``U``."""

    matrix: tuple[tuple[float, float, float], ...]
    shift: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (3, 3):
            raise ValueError("motion matrix must be 3x3")
        if np.abs(m.T @ m - np.eye(3)).max() > 1e-12:
            raise ValueError("motion matrix is not orthogonal")
        object.__setattr__(self, "matrix", tuple(tuple(row) for row in m))
        object.__setattr__(self, "shift", _as_triple(self.shift))

    @property
    def mat(self) -> np.ndarray:
        return np.array(self.matrix)

    @classmethod
    def identity(cls) -> "RigidMotion":
        return cls(tuple(tuple(float(i == j) for j in range(3)) for i in range(3)))

    @classmethod
    def translation(cls, t) -> "RigidMotion":
        return cls(cls.identity().matrix, _as_triple(t))

    @classmethod
    def axis_permutation(cls, perm: tuple[int, int, int],
                         signs: tuple[int, int, int] = (1, 1, 1),
                         shift=(0.0, 0.0, 0.0)) -> "RigidMotion":
        """Signed permutation: output axis ``r`` reads ``signs[r] * x[perm[r]]``."""
        if sorted(perm) != [0, 1, 2] or any(s not in (-1, 1) for s in signs):
            raise ValueError(f"invalid signed permutation {perm}, {signs}")
        m = np.zeros((3, 3))
        for r in range(3):
            m[r, perm[r]] = float(signs[r])
        return cls(tuple(tuple(row) for row in m), shift)

    @classmethod
    def rotation(cls, axis, angle: float, shift=(0.0, 0.0, 0.0)) -> "RigidMotion":
        """Rotation by ``angle`` about the (not necessarily coordinate) ``axis``."""
        a = np.asarray(axis, dtype=float)
        nrm = np.linalg.norm(a)
        if nrm == 0:
            raise ValueError("rotation axis must be nonzero")
        a = a / nrm
        K = np.array([[0, -a[2], a[1]], [a[2], 0, -a[0]], [-a[1], a[0], 0]])
        m = np.eye(3) + math.sin(angle) * K + (1 - math.cos(angle)) * (K @ K)
        return cls(tuple(tuple(row) for row in m), shift)

    def apply(self, x) -> np.ndarray:
        """Apply to one point or a batch with trailing dimension 3."""
        x = np.asarray(x, dtype=float)
        return x @ self.mat.T + np.asarray(self.shift)

    def inverse(self) -> "RigidMotion":
        mt = self.mat.T
        return RigidMotion(tuple(tuple(row) for row in mt),
                           tuple(-(mt @ np.asarray(self.shift))))

    def compose(self, other: "RigidMotion") -> "RigidMotion":
        """The motion ``x -> self(other(x))``."""
        m = self.mat @ other.mat
        t = self.mat @ np.asarray(other.shift) + np.asarray(self.shift)
        return RigidMotion(tuple(tuple(row) for row in m), tuple(t))

    def is_signed_permutation(self, tol: float = 1e-14) -> bool:
        m = self.mat
        return bool(np.all(np.min(np.abs(np.abs(m) - np.array([0.0, 1.0])[:, None, None]),
                                  axis=0) <= tol)
                    and np.all(np.sum(np.abs(m) > 0.5, axis=0) == 1)
                    and np.all(np.sum(np.abs(m) > 0.5, axis=1) == 1))

    def transform_box(self, box: Box) -> Box:
        """Image of an axis-aligned box; requires a signed-permutation matrix."""
        if not self.is_signed_permutation():
            raise ValueError("box transport needs an axis-aligned (signed permutation) matrix")
        m = np.rint(self.mat)
        lo, hi = box.arrays()
        a = m @ lo + np.asarray(self.shift)
        b = m @ hi + np.asarray(self.shift)
        return Box(np.minimum(a, b), np.maximum(a, b))
