"""Forward operator: potentials by closed form and adaptive quadrature,
dense assembly of the lattice-to-boundary matrix, rigid-motion transport.

The quadrature path integrates ``grad N(x - y) . f(y)`` over the support of
f.  Every supported field decomposes into regions that are smooth images of
the unit cube (boxes affinely, triangular prisms by a Duffy collapse, balls
by spherical coordinates), and one h-adaptive tensor Gauss-Legendre engine
handles all of them: per element the rule value is compared against the sum
over its 2^3 children (a two-level Richardson comparison), the worst element
is split, and the run is accepted once the accumulated estimate drops under
``max(rtol * |integral|, atol)``.  The refinement order is deterministic, so
repeated runs give identical results bit for bit.
"""

from __future__ import annotations

import heapq
import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .geometry import Ball, Box, Lattice, RigidMotion, SurfaceGrid
from .kernels import (KERNEL_CONVENTION, EdgeEvaluationError, corner_gradient_terms,
                      grad_newton, prism_potential)
from .fields import (BoxSimpleField, LatticeField, NestedBallField, PrismField,
                     RotatedBoxField, SmoothField)

__all__ = [
    "QuadratureError",
    "AssemblyError",
    "QuadratureSpec",
    "ForwardMatrix",
    "integrate_box",
    "potential_box_simple",
    "potential_quadrature",
    "potential",
    "potential_scale",
    "net_moment_quadrature",
    "smooth_l1_norm",
    "assemble",
    "apply_forward",
    "boundary_l2_norm",
    "transform_field",
    "save_matrix",
    "load_matrix",
]


class QuadratureError(RuntimeError):
    """Adaptive refinement could not reach the requested tolerance."""


class AssemblyError(ValueError):
    """Grid/lattice combination unusable for closed-form assembly."""


@dataclass(frozen=True)
class QuadratureSpec:
    """Tensor Gauss-Legendre rule of ``order`` points per axis with
    h-adaptive bisection down to relative tolerance ``rtol`` (plus an
    optional absolute floor ``atol`` for integrals that cancel to zero)."""

    order: int = 6
    rtol: float = 1e-10
    atol: float = 0.0
    max_depth: int = 30
    max_elements: int = 200_000

    def __post_init__(self):
        if self.order < 2:
            raise ValueError("quadrature order must be at least 2")
        if self.rtol <= 0.0 and self.atol <= 0.0:
            raise ValueError("need a positive rtol or atol")


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gl_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights of the tensorized rule on the unit cube: ((p^3, 3), (p^3,))."""
    got = _GL_CACHE.get(order)
    if got is None:
        x, w = np.polynomial.legendre.leggauss(order)
        x = 0.5 * (x + 1.0)
        w = 0.5 * w
        X = np.stack(np.meshgrid(x, x, x, indexing="ij"), axis=-1).reshape(-1, 3)
        W = (w[:, None, None] * w[None, :, None] * w[None, None, :]).reshape(-1)
        got = (X, W)
        _GL_CACHE[order] = got
    return got


def _rule_value(func, lo: np.ndarray, hi: np.ndarray, order: int):
    X, W = _gl_rule(order)
    side = hi - lo
    pts = lo + X * side
    vals = np.asarray(func(pts), dtype=float)
    vol = float(side[0] * side[1] * side[2])
    return vol * (W @ vals)


def _octants(lo: np.ndarray, hi: np.ndarray):
    mid = 0.5 * (lo + hi)
    for sx in range(2):
        for sy in range(2):
            for sz in range(2):
                l = np.array([lo[0] if sx == 0 else mid[0],
                              lo[1] if sy == 0 else mid[1],
                              lo[2] if sz == 0 else mid[2]])
                h = np.array([mid[0] if sx == 0 else hi[0],
                              mid[1] if sy == 0 else hi[1],
                              mid[2] if sz == 0 else hi[2]])
                yield l, h


def integrate_box(func, box: Box, spec: QuadratureSpec = QuadratureSpec()):
    """Adaptively integrate ``func`` (vectorized ``(N,3) -> (N,)`` or
    ``(N,m)``) over the box to ``max(rtol |I|, atol)``."""
    lo0, hi0 = box.arrays()

    def make_element(lo, hi, coarse, depth, counter):
        kids = []
        fine = None
        for l, h in _octants(lo, hi):
            v = _rule_value(func, l, h, spec.order)
            kids.append((l, h, v))
            fine = v if fine is None else fine + v
        err = float(np.max(np.abs(fine - coarse)))
        return (-err, counter, depth, kids, fine, err)

    counter = 0
    root_coarse = _rule_value(func, lo0, hi0, spec.order)
    root = make_element(lo0, hi0, root_coarse, 0, counter)
    counter += 1
    heap = [root]
    total = root[4]
    total_err = root[5]
    n_elements = 1

    while True:
        tol = max(spec.rtol * float(np.max(np.abs(total))), spec.atol)
        if total_err <= tol:
            return total
        neg_err, _, depth, kids, fine, err = heapq.heappop(heap)
        if depth >= spec.max_depth:
            raise QuadratureError(
                f"tolerance not reached: estimate {total_err:.3e} > {tol:.3e} at max depth")
        if n_elements + 8 > spec.max_elements:
            raise QuadratureError("tolerance not reached: element budget exhausted")
        total = total - fine
        total_err -= err
        for l, h, coarse in kids:
            el = make_element(l, h, coarse, depth + 1, counter)
            counter += 1
            heapq.heappush(heap, el)
            total = total + el[4]
            total_err += el[5]
        n_elements += 7


_UNIT_CUBE = Box((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))


# ---------------------------------------------------------------------------
# region decompositions: everything becomes maps from the unit cube
# ---------------------------------------------------------------------------

def _box_region(box: Box, values):
    lo, hi = box.arrays()
    side = hi - lo
    vol = box.volume

    def mapper(U):
        return lo + U * side, np.full(U.shape[0], vol)

    return mapper, values


def _prism_region(prism, values):
    (ax, ay), (bx, by), (cx, cy) = prism.tri
    z0, z1 = prism.zlim
    cr = (bx - ax) * (cy - ay) - (cx - ax) * (by - ay)  # 2 * signed area
    jac0 = abs(cr) * (z1 - z0)

    def mapper(U):
        u, v, w = U[:, 0], U[:, 1], U[:, 2]
        # Duffy collapse of the triangle: y = A + u (B - A) + u v (C - B)
        x = ax + u * (bx - ax) + u * v * (cx - bx)
        y = ay + u * (by - ay) + u * v * (cy - by)
        z = z0 + w * (z1 - z0)
        return np.column_stack([x, y, z]), jac0 * u

    return mapper, values


def _ball_region(center, rho0: float, rho1: float, values):
    c = np.asarray(center, dtype=float)
    dr = rho1 - rho0

    def mapper(U):
        # (rho, theta, phi) spherical chart; smooth on the whole unit cube
        rho = rho0 + U[:, 0] * dr
        theta = math.pi * U[:, 1]
        phi = 2.0 * math.pi * U[:, 2]
        st = np.sin(theta)
        y = c + np.column_stack([rho * st * np.cos(phi), rho * st * np.sin(phi),
                                 rho * np.cos(theta)])
        return y, dr * math.pi * 2.0 * math.pi * rho * rho * st

    return mapper, values


def _regions(f):
    """Unit-cube regions covering supp f: list of (mapper, values) where
    ``values`` is a constant vector or a vectorized evaluator."""
    if isinstance(f, LatticeField):
        f = f.to_box_simple()
    if isinstance(f, BoxSimpleField):
        return [_box_region(b, np.asarray(v)) for b, v in f.parts]
    if isinstance(f, PrismField):
        return [_prism_region(p, np.asarray(v)) for p, v in f.parts]
    if isinstance(f, NestedBallField):
        v = np.asarray(f.v)
        return [_ball_region(f.center, 0.0, f.r, v),
                _ball_region(f.center, 0.0, f.alpha * f.r, -v / f.alpha**3)]
    if isinstance(f, RotatedBoxField):
        inv = f.motion.inverse()
        out = []
        for b, v in f.base.parts:
            box_mapper, _ = _box_region(b, None)
            vv = f.motion.mat.T @ np.asarray(v)

            def mapper(U, box_mapper=box_mapper):
                z, jac = box_mapper(U)
                return inv.apply(z), jac  # rigid motions preserve volume

            out.append((mapper, vv))
        return out
    if isinstance(f, SmoothField):
        if isinstance(f.support, Box):
            cuts = []
            for a in range(3):
                lo, hi = f.support.lo[a], f.support.hi[a]
                inner = [b for b in f.axis_breakpoints[a] if lo < b < hi]
                cuts.append([lo] + sorted(set(inner)) + [hi])
            out = []
            for i in range(len(cuts[0]) - 1):
                for j in range(len(cuts[1]) - 1):
                    for k in range(len(cuts[2]) - 1):
                        piece = Box((cuts[0][i], cuts[1][j], cuts[2][k]),
                                    (cuts[0][i + 1], cuts[1][j + 1], cuts[2][k + 1]))
                        out.append(_box_region(piece, f.evaluate))
            return out
        ball = f.support
        radii = sorted(set((0.0,) + tuple(f.radial_breakpoints) + (ball.radius,)))
        return [_ball_region(ball.center, r0, r1, f.evaluate)
                for r0, r1 in zip(radii[:-1], radii[1:])]
    raise TypeError(f"no quadrature decomposition for field type {type(f).__name__}")


def _region_values(values, Y: np.ndarray) -> np.ndarray:
    if callable(values):
        return np.asarray(values(Y), dtype=float)
    return np.broadcast_to(values, (Y.shape[0], 3))


def _check_exterior(f, x: np.ndarray) -> None:
    """Reject evaluation points strictly inside the support (singular integrand)."""
    if isinstance(f, LatticeField):
        f = f.to_box_simple()
    if isinstance(f, BoxSimpleField):
        for b, _ in f.parts:
            if b.contains(x, strict=True):
                raise ValueError("quadrature needs the evaluation point outside the support")
    elif isinstance(f, NestedBallField):
        if np.linalg.norm(x - np.asarray(f.center)) < f.r:
            raise ValueError("quadrature needs the evaluation point outside the support")
    elif isinstance(f, RotatedBoxField):
        _check_exterior(f.base, f.motion.apply(x))
    elif isinstance(f, SmoothField):
        s = f.support
        if isinstance(s, Box):
            if s.contains(x, strict=True):
                raise ValueError("quadrature needs the evaluation point outside the support")
        elif np.linalg.norm(x - np.asarray(s.center)) < s.radius:
            raise ValueError("quadrature needs the evaluation point outside the support")


def potential_quadrature(f, x, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Potential at one exterior point by adaptive quadrature over supp f."""
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise ValueError("potential_quadrature evaluates one point at a time")
    _check_exterior(f, x)
    regions = _regions(f)
    if not regions:
        return 0.0
    sub = QuadratureSpec(spec.order, spec.rtol, spec.atol / len(regions) if spec.atol else 0.0,
                         spec.max_depth, spec.max_elements)
    total = 0.0
    for mapper, values in regions:
        def integrand(U):
            Y, jac = mapper(U)
            vals = _region_values(values, Y)
            return np.sum(grad_newton(x - Y) * vals, axis=1) * jac

        total += float(integrate_box(integrand, _UNIT_CUBE, sub))
    return total


def net_moment_quadrature(f, spec: QuadratureSpec | None = None) -> np.ndarray:
    """Net moment by quadrature (componentwise, absolute tolerance)."""
    if spec is None:
        spec = QuadratureSpec(rtol=1e-12, atol=1e-14)
    m = np.zeros(3)
    for mapper, values in _regions(f):
        def integrand(U):
            Y, jac = mapper(U)
            return _region_values(values, Y) * jac[:, None]

        m = m + integrate_box(integrand, _UNIT_CUBE, spec)
    return m


def smooth_l1_norm(f, spec: QuadratureSpec | None = None) -> float:
    """Integral of |f| by quadrature; a norm scale, not a precision target."""
    if spec is None:
        spec = QuadratureSpec(rtol=1e-6, atol=1e-300)
    total = 0.0
    for mapper, values in _regions(f):
        def integrand(U):
            Y, jac = mapper(U)
            vals = _region_values(values, Y)
            return np.linalg.norm(vals, axis=1) * jac

        total += float(integrate_box(integrand, _UNIT_CUBE, spec))
    return total


# ---------------------------------------------------------------------------
# closed-form paths
# ---------------------------------------------------------------------------

def potential_box_simple(f: BoxSimpleField | LatticeField, x) -> np.ndarray | float:
    """Potential of a box-simple (or lattice) field by the prism closed form.

    Valid off the closed edges of every part (open faces are fine).
    Vectorized over evaluation points; linear in the field.
    """
    if isinstance(f, LatticeField):
        f = f.to_box_simple()
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1])
    for box, v in f.parts:
        out = out + prism_potential(box, v, x)
    return out if np.ndim(out) else float(out)


def potential(f, x, spec: QuadratureSpec = QuadratureSpec()):
    """Umbrella evaluator: closed form where available, quadrature otherwise."""
    if isinstance(f, (BoxSimpleField, LatticeField)):
        return potential_box_simple(f, x)
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return potential_quadrature(f, x, spec)
    flat = x.reshape(-1, 3)
    vals = np.array([potential_quadrature(f, p, spec) for p in flat])
    return vals.reshape(x.shape[:-1])


def potential_scale(f, points) -> float:
    """Magnitude yardstick for potentials of f at the given exterior points:
    L1 mass of the field times the kernel magnitude at the closest approach,
    ``|grad N| = 1/(omega_3 dist^2)``."""
    from .fields import field_l1_norm
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    sb = f.support_box()
    if sb is None:
        return 0.0
    lo, hi = sb.arrays()
    gaps = np.maximum(np.maximum(lo - pts, pts - hi), 0.0)
    dmin = float(np.min(np.linalg.norm(gaps, axis=1)))
    if dmin <= 0.0:
        raise ValueError("scale needs points strictly outside the support box")
    return field_l1_norm(f) / (4.0 * math.pi * dmin**2)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ForwardMatrix:
    """Dense map from lattice coefficients to boundary samples.

    ``entries`` has shape ``(M, 3 N)``: column ``3 i + c`` holds the
    potential of cell i magnetized with the unit vector e_{c+1}, evaluated
    at the grid points.
    """

    entries: np.ndarray
    grid: SurfaceGrid
    lattice: Lattice
    convention: str = KERNEL_CONVENTION

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=float)
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    @cached_property
    def two_norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))


def assemble(lattice: Lattice, grid: SurfaceGrid,
             entry_cap: int = 50_000_000) -> ForwardMatrix:
    """Closed-form dense assembly of the forward matrix.

    Grid points must keep clear of the lattice cell-boundary planes in
    their tangential coordinates (build the grid with ``surface_grid(k,
    lattice)``); the gradient closed form has no finite value on cell
    edges.  Per point, the corner terms are evaluated on the full
    ``(n+1)^3`` grid of cell-corner offsets and combined per cell by an
    alternating third difference — fixed evaluation order, hence bitwise
    reproducible.
    """
    n = lattice.n
    M = grid.n_points
    cols = 3 * lattice.n_cells
    if M * cols > entry_cap:
        raise AssemblyError(
            f"matrix would hold {M * cols} entries (cap {entry_cap}); "
            "reduce the grid k or the lattice n, or raise entry_cap")
    margin = lattice.delta / (4.0 * grid.k)
    dist = grid.min_plane_distance(lattice)
    if dist <= 0.0:
        raise AssemblyError(
            "grid points lie exactly on lattice cell edges; "
            "build the grid with surface_grid(k, lattice)")
    if dist <= margin:
        raise AssemblyError(
            f"grid clears lattice planes by only {dist:.3e} (< delta/(4k) = {margin:.3e}); "
            "build the grid with surface_grid(k, lattice)")

    edges = lattice.edges
    out = np.empty((M, cols))
    scale = -1.0 / (4.0 * math.pi)  # grad Phi = -(alternating corner sum)

    def third_difference(T: np.ndarray) -> np.ndarray:
        # alternating sum over the 8 corners of every cell: + at all-upper
        d = T[1:, :, :] - T[:-1, :, :]
        d = d[:, 1:, :] - d[:, :-1, :]
        return d[:, :, 1:] - d[:, :, :-1]

    for row, p in enumerate(grid.points):
        X = edges - p[0]
        Y = edges - p[1]
        Z = edges - p[2]
        fx, fy, fz = corner_gradient_terms(X[:, None, None], Y[None, :, None], Z[None, None, :])
        gx = scale * third_difference(fx)
        gy = scale * third_difference(fy)
        gz = scale * third_difference(fz)
        cell = np.stack([gx, gy, gz], axis=-1)  # (n, n, n, 3)
        out[row] = cell.reshape(-1)

    if not np.all(np.isfinite(out)):
        raise AssemblyError("assembled matrix contains non-finite entries")
    return ForwardMatrix(out, grid, lattice)


def apply_forward(P: ForwardMatrix, f: LatticeField) -> np.ndarray:
    if f.lattice != P.lattice:
        raise ValueError(
            f"field lattice n={f.lattice.n} does not match operator lattice n={P.lattice.n}")
    return P.entries @ f.coeffs


def boundary_l2_norm(samples: np.ndarray, grid: SurfaceGrid) -> float:
    """Discrete L2(boundary) norm: sqrt(|dOmega|/M) * ||samples||_2."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (grid.n_points,):
        raise ValueError(f"expected {grid.n_points} samples, got {samples.shape}")
    return math.sqrt(grid.weight) * float(np.linalg.norm(samples))


# ---------------------------------------------------------------------------
# rigid-motion transport
# ---------------------------------------------------------------------------

def transform_field(f: BoxSimpleField, U: RigidMotion):
    """Companion field ``f_U(x) = U^T f(U x + t)`` with
    ``P(f)(U x + t) = P(f_U)(x)``.

    Signed-permutation matrices keep the result box-simple (closed-form
    evaluation); anything else returns the implicit rotated form whose
    potential goes through quadrature.
    """
    if not isinstance(f, BoxSimpleField):
        raise TypeError("transform_field expects a box-simple field")
    if U.is_signed_permutation():
        inv = U.inverse()
        parts = []
        for box, v in f.parts:
            new_box = inv.transform_box(box)
            new_v = tuple(U.mat.T @ np.asarray(v))
            parts.append((new_box, new_v))
        return BoxSimpleField(tuple(parts))
    return RotatedBoxField(f, U)


# ---------------------------------------------------------------------------
# matrix export
# ---------------------------------------------------------------------------

def save_matrix(P: ForwardMatrix, basepath, csv_threshold: int = 40_000) -> list[str]:
    """Write ``<base>.bin`` (column-major float64) + ``<base>.json`` sidecar;
    small matrices additionally get a ``<base>.csv``.  Returns the paths."""
    base = Path(basepath)
    base.parent.mkdir(parents=True, exist_ok=True)
    rows, cols = P.shape
    bin_path = base.with_suffix(".bin")
    bin_path.write_bytes(np.asarray(P.entries, dtype="<f8").tobytes(order="F"))
    sidecar = {
        "rows": rows,
        "cols": cols,
        "dtype": "float64 little-endian",
        "order": "column-major",
        "delta": P.lattice.delta,
        "n": P.lattice.n,
        "k": P.grid.k,
        "convention": P.convention,
    }
    json_path = base.with_suffix(".json")
    json_path.write_text(json.dumps(sidecar, indent=2) + "\n")
    written = [str(bin_path), str(json_path)]
    if rows * cols <= csv_threshold:
        csv_path = base.with_suffix(".csv")
        np.savetxt(csv_path, P.entries, delimiter=",", fmt="%.17g")
        written.append(str(csv_path))
    return written


def load_matrix(basepath) -> tuple[np.ndarray, dict]:
    """Read back a saved matrix; returns (entries, sidecar)."""
    base = Path(basepath)
    sidecar = json.loads(base.with_suffix(".json").read_text())
    raw = np.frombuffer(base.with_suffix(".bin").read_bytes(), dtype="<f8")
    entries = raw.reshape((sidecar["rows"], sidecar["cols"]), order="F")
    return entries, sidecar
