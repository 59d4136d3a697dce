"""Inversion and discretization-stability diagnostics.

The quantities of interest are the stability constant of the sampled
forward map,

    C(delta) = sup_v  delta^{3/2} |v|_2 / ( sqrt(|dOmega|/M) |P v|_2 ),

its per-field lower bound C_f(delta), and exponential growth fits of
either across a lattice sweep. C(delta) comes down to the smallest
singular value of the forward matrix; because that value collapses
rapidly as the lattice is refined, it is certified by two independent
algorithms (dense SVD vs inverse iteration on the normal matrix carried
in double-double arithmetic) and the computation escalates to ~106-bit
precision when the condition estimate passes ``EXTENDED_THRESHOLD``.

A note on scalings: the literature also quotes the variants
``(|dOmega|/(M delta^3)) |v|/|Pv|`` and ``delta^3 |(P^T P)^{-1}|_2``,
which drop the square roots implied by the discrete L2 norms. Both
variants are computed here — the norm-consistent one as the primary
value, the literal one as a secondary diagnostic — since fixed
rescalings do not change growth trends but do change absolute values.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, Sequence

import numpy as np

from . import ddouble
from .ddouble import CholeskyFailure
from .fields import LatticeField, bump_gradient, discretize
from .forward import ForwardMatrix, assemble
from .geometry import SURFACE_AREA, build_lattice, surface_grid

#: condition-number estimate beyond which the normal-matrix path runs in
#: double-double arithmetic
EXTENDED_THRESHOLD = 1e12
#: the two sigma_min estimates must agree to this relative tolerance
CERTIFICATION_RTOL = 1e-2
#: |Pv| below this multiple of eps * |P| * |v| counts as numerically zero
ZERO_POTENTIAL_FACTOR = 1e3

_ALPHA_RANGE = (0.05, 3.0)


class ZeroPotentialError(ArithmeticError):
    """Sampled potential is numerically zero — precision exhausted.

    An exactly zero potential would contradict injectivity of the forward
    map on lattice fields, so hitting this means the true value drowned
    in roundoff, not that the field is invisible.
    """


class CertificationError(ArithmeticError):
    """sigma_min could not be certified at the available precision."""


class DegenerateFitError(ValueError):
    """Fit input admits no meaningful exponential model."""


# ---------------------------------------------------------------------------
# field-specific stability ratio


@dataclass(frozen=True)
class FieldRatio:
    """Norm-consistent C_f value plus the literal-scaling variant."""

    value: float
    paper_value: float


def field_ratio_cf(P: ForwardMatrix, f: LatticeField | np.ndarray) -> FieldRatio:
    """Stability ratio |f|_{L2(Omega)} / |P f|_{L2(dOmega)} of one lattice field.

    Scale invariant: cf(c v) == cf(v) for any c != 0. Raises
    ValueError on the zero field and ZeroPotentialError when |Pv| is
    indistinguishable from roundoff on |P| |v|.
    """
    if isinstance(f, LatticeField):
        if f.lattice != P.lattice:
            raise ValueError(
                f"field lattice n={f.lattice.n} does not match operator lattice n={P.lattice.n}")
        v = f.coeffs
    else:
        v = np.asarray(f, dtype=float)
        if v.shape != (P.shape[1],):
            raise ValueError(f"coefficient vector must have length {P.shape[1]}, got {v.shape}")
    norm_v = float(np.linalg.norm(v))
    if norm_v == 0.0:
        raise ValueError("zero field has no stability ratio")
    samples = P.entries @ v
    norm_s = float(np.linalg.norm(samples))
    floor = ZERO_POTENTIAL_FACTOR * np.finfo(float).eps * P.two_norm * norm_v
    if norm_s <= floor:  # <=: an all-zero matrix has floor == norm_s == 0
        raise ZeroPotentialError(
            f"potential numerically zero: |Pv| = {norm_s:.3e} below the roundoff floor "
            f"{floor:.3e}; the ratio would measure precision loss, not stability")
    delta = P.lattice.delta
    M = P.grid.n_points
    value = delta ** 1.5 * norm_v / (math.sqrt(SURFACE_AREA / M) * norm_s)
    paper_value = (SURFACE_AREA / (M * delta ** 3)) * norm_v / norm_s
    return FieldRatio(value, paper_value)


# ---------------------------------------------------------------------------
# operator constant via certified smallest singular value


@dataclass(frozen=True)
class OperatorConstants:
    """Certified stability constants of one forward matrix."""

    c_delta: float
    c_delta_paper: float
    sigma_min: float
    precision_bits: int
    #: relative gap between the SVD and inverse-iteration estimates
    certified_agreement: float


def _sigma_min_normal(entries: np.ndarray, exact_product: bool, seed: int) -> float:
    """sigma_min via inverse iteration on P^T P in double-double arithmetic.

    ``exact_product`` accumulates the normal matrix with error-free
    transforms; otherwise it is formed in double (adequate while
    cols * eps * kappa^2 stays well below the certification tolerance).
    """
    if exact_product:
        G = ddouble.normal_matrix(entries)
    else:
        G = ddouble.dd(entries.T @ entries)
    lam = ddouble.smallest_eigenvalue(G, rtol=1e-6, seed=seed)
    if not lam > 0.0:
        raise CholeskyFailure(f"nonpositive smallest eigenvalue {lam!r}")
    return math.sqrt(lam)


def operator_constant(P: ForwardMatrix, precision: str = "auto") -> OperatorConstants:
    """Certified C(delta), its literal-scaling variant, and sigma_min(P).

    ``precision``: "double" reports the LAPACK SVD value (53-bit),
    "extended" the double-double inverse-iteration value (106-bit),
    "auto" escalates to extended when the condition estimate exceeds
    EXTENDED_THRESHOLD. Either way BOTH estimates are computed and must
    agree to CERTIFICATION_RTOL, else CertificationError.
    """
    if precision not in ("auto", "double", "extended"):
        raise ValueError(f"precision must be auto, double or extended, not {precision!r}")
    entries = P.entries
    sing = np.linalg.svd(entries, compute_uv=False)
    sigma_svd = float(sing[-1])
    sigma_max = float(sing[0])
    if not (np.isfinite(sigma_svd) and sigma_svd > 0.0):
        raise CertificationError(
            f"rank deficient to working precision: SVD reports sigma_min = {sigma_svd!r}")
    kappa = sigma_max / sigma_svd
    extended = precision == "extended" or (precision == "auto" and kappa > EXTENDED_THRESHOLD)
    cols = entries.shape[1]
    eps = np.finfo(float).eps
    # double-rounded P^T P shifts lambda_min by ~ cols*eps*lambda_max: form the
    # product exactly once that shift could eat into the certification margin
    exact_product = extended or cols * eps * kappa * kappa > 1e-4
    try:
        sigma_ii = _sigma_min_normal(entries, exact_product, seed=0)
    except CholeskyFailure as exc:
        raise CertificationError(
            f"rank deficient to working precision: normal matrix not positive "
            f"definite under inverse iteration ({exc})") from exc
    agreement = abs(sigma_ii - sigma_svd) / max(sigma_ii, sigma_svd)
    if agreement > CERTIFICATION_RTOL:
        raise CertificationError(
            f"rank deficient to working precision: sigma_min estimates disagree "
            f"(SVD {sigma_svd:.6e} vs inverse iteration {sigma_ii:.6e}, "
            f"relative gap {agreement:.2e} > {CERTIFICATION_RTOL})")
    sigma = sigma_ii if extended else sigma_svd
    delta = P.lattice.delta
    M = P.grid.n_points
    c_delta = delta ** 1.5 / (math.sqrt(SURFACE_AREA / M) * sigma)
    c_delta_paper = delta ** 3 / sigma ** 2
    return OperatorConstants(
        c_delta=c_delta,
        c_delta_paper=c_delta_paper,
        sigma_min=sigma,
        precision_bits=106 if extended else 53,
        certified_agreement=agreement,
    )


# ---------------------------------------------------------------------------
# least-squares inversion


def invert(P: ForwardMatrix, samples: np.ndarray,
           regularization: float = 0.0) -> LatticeField:
    """Recover lattice coefficients from boundary samples.

    regularization == 0: minimum-norm least-squares solution (full rank
    makes it unique). regularization > 0: Tikhonov solution of
    |Pv - s|^2 + lambda |v|^2 through the SVD filter s/(s^2 + lambda).
    """
    s = np.asarray(samples, dtype=float)
    if s.shape != (P.shape[0],):
        raise ValueError(f"expected {P.shape[0]} samples, got shape {s.shape}")
    if regularization < 0.0:
        raise ValueError(f"regularization must be >= 0, got {regularization}")
    if regularization == 0.0:
        v, *_ = np.linalg.lstsq(P.entries, s, rcond=None)
    else:
        U, sig, Vt = np.linalg.svd(P.entries, full_matrices=False)
        v = Vt.T @ (sig / (sig ** 2 + regularization) * (U.T @ s))
    return LatticeField(P.lattice, v)


# ---------------------------------------------------------------------------
# exponential growth fits


@dataclass(frozen=True)
class FitResult:
    """Parameters of the growth model C(delta) ~ exp(gamma + beta * delta^(-alpha))."""

    gamma: float
    beta: float
    alpha: float
    residual_rms: float
    n_points: int

    def predict(self, delta) -> np.ndarray:
        d = np.asarray(delta, dtype=float)
        return np.exp(self.gamma + self.beta * d ** (-self.alpha))


def _linear_subfit(t: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Exact least squares for y ~ gamma + beta * t; returns (gamma, beta, sse)."""
    t_bar = t.mean()
    y_bar = y.mean()
    dt = t - t_bar
    denom = float(dt @ dt)
    if denom == 0.0:
        # t constant: gamma alone explains the mean
        resid = y - y_bar
        return float(y_bar), 0.0, float(resid @ resid)
    beta = float(dt @ (y - y_bar)) / denom
    gamma = float(y_bar - beta * t_bar)
    resid = y - gamma - beta * t
    return gamma, beta, float(resid @ resid)


def fit_exponential(points: Sequence[tuple[float, float]]) -> FitResult:
    """Least-squares fit of log C = gamma + beta * delta^(-alpha).

    The inner (gamma, beta) problem is solved exactly for each alpha; the
    outer 1-D objective is scanned on a grid over [0.05, 3] and polished
    by golden-section search to |interval| < 1e-8. Ties resolve to the
    smallest alpha. Raises DegenerateFitError on fewer than 3 points,
    duplicate deltas, or nonpositive C.
    """
    pts = [(float(d), float(c)) for d, c in points]
    if len(pts) < 3:
        raise DegenerateFitError(
            f"degenerate fit: need at least 3 points, got {len(pts)}")
    deltas = np.array([p[0] for p in pts])
    cs = np.array([p[1] for p in pts])
    if np.any(deltas <= 0.0):
        raise DegenerateFitError("degenerate fit: deltas must be positive")
    if np.any(cs <= 0.0):
        raise DegenerateFitError("degenerate fit: C values must be positive")
    if np.unique(deltas).size != deltas.size:
        raise DegenerateFitError("degenerate fit: duplicate deltas")
    y = np.log(cs)

    def sse(alpha: float) -> float:
        return _linear_subfit(deltas ** (-alpha), y)[2]

    lo, hi = _ALPHA_RANGE
    grid = np.linspace(lo, hi, 241)
    values = np.array([sse(a) for a in grid])
    best = int(np.argmin(values))  # first minimum, i.e. the smallest alpha
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, grid.size - 1)]
    # golden-section polish; <= steers plateaus toward smaller alpha
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = sse(c), sse(d)
    while b - a > 1e-8:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = sse(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = sse(d)
    alpha = a if sse(a) <= sse(b) else b
    gamma, beta, s = _linear_subfit(deltas ** (-alpha), y)
    return FitResult(gamma=gamma, beta=beta, alpha=float(alpha),
                     residual_rms=math.sqrt(s / len(pts)), n_points=len(pts))


# ---------------------------------------------------------------------------
# lattice sweep


@dataclass
class StabilityRecord:
    """Stability quantities of one lattice refinement level."""

    delta: float
    n_cells: int
    n_samples: int
    c_delta: float
    c_delta_paper: float
    cf: dict[str, float]
    cf_paper: dict[str, float]
    sigma_min: float
    precision_bits: int
    wall_ms: float
    errors: tuple[str, ...] = ()


@dataclass
class SweepResult:
    records: list[StabilityRecord]
    #: series label -> FitResult, or the reason the fit was skipped
    fits: dict[str, FitResult | str]
    field_labels: tuple[str, ...]
    config: dict


def default_sweep_fields() -> tuple[tuple[str, object], ...]:
    """The two bump-gradient test fields swept by default."""
    return (("a0.5", bump_gradient(0.5)), ("a0.25", bump_gradient(0.25)))


def auto_grid_k(n: int) -> int:
    """Smallest k with 6 k^2 >= 10 * (3 n^3), a comfortable full-rank margin."""
    return max(2, math.ceil(math.sqrt(5.0 * n ** 3)))


def sweep(n_list: Sequence[int] = (2, 3, 4, 5, 6),
          k: int | None = None,
          fields: Sequence[tuple[str, object]] | None = None,
          precision: str = "auto",
          progress: Callable[[str], None] | None = None) -> SweepResult:
    """Assemble, certify and measure every lattice level in ``n_list``.

    ``k`` fixes the surface grid parameter for all levels; None picks
    auto_grid_k(n) per level. ``fields`` is a sequence of (label,
    continuous field) pairs run through discretize + field_ratio_cf;
    None sweeps the two default bump gradients. Per-level failures are
    recorded on the level's StabilityRecord and the sweep continues.
    """
    if len(n_list) == 0:
        raise ValueError("n_list must be nonempty")
    if list(n_list) != sorted(set(n_list)):
        raise ValueError(f"n_list must be strictly ascending, got {list(n_list)}")
    field_list = default_sweep_fields() if fields is None else tuple(fields)
    labels = tuple(label for label, _ in field_list)
    records: list[StabilityRecord] = []
    for n in n_list:
        start = time.perf_counter()
        lattice = build_lattice(n)
        k_n = auto_grid_k(n) if k is None else k
        grid = surface_grid(k_n, lattice)
        errors: list[str] = []
        if progress is not None:
            progress(f"n={n}: assembling {grid.n_points} x {3 * lattice.n_cells}")
        P = assemble(lattice, grid)
        c_delta = c_delta_paper = sigma_min = math.nan
        bits = 0
        try:
            oc = operator_constant(P, precision)
            c_delta, c_delta_paper = oc.c_delta, oc.c_delta_paper
            sigma_min, bits = oc.sigma_min, oc.precision_bits
        except (CertificationError, CholeskyFailure) as exc:
            errors.append(f"C_delta: {exc}")
        cf: dict[str, float] = {}
        cf_paper: dict[str, float] = {}
        for label, f in field_list:
            try:
                ratio = field_ratio_cf(P, discretize(f, lattice))
                cf[label] = ratio.value
                cf_paper[label] = ratio.paper_value
            except (ValueError, ZeroPotentialError) as exc:
                cf[label] = math.nan
                cf_paper[label] = math.nan
                errors.append(f"Cf_{label}: {exc}")
        wall_ms = (time.perf_counter() - start) * 1000.0
        records.append(StabilityRecord(
            delta=lattice.delta, n_cells=lattice.n_cells, n_samples=grid.n_points,
            c_delta=c_delta, c_delta_paper=c_delta_paper,
            cf=cf, cf_paper=cf_paper, sigma_min=sigma_min,
            precision_bits=bits, wall_ms=wall_ms, errors=tuple(errors)))
        if progress is not None:
            progress(f"n={n}: C_delta={c_delta:.6g} sigma_min={sigma_min:.6g} "
                     f"({wall_ms:.0f} ms)")

    fits: dict[str, FitResult | str] = {}
    series: list[tuple[str, list[tuple[float, float]]]] = [
        ("C_delta", [(r.delta, r.c_delta) for r in records if math.isfinite(r.c_delta)])]
    for label in labels:
        series.append((f"Cf_{label}",
                       [(r.delta, r.cf[label]) for r in records
                        if math.isfinite(r.cf.get(label, math.nan))]))
    for name, pts in series:
        try:
            fits[name] = fit_exponential(pts)
        except DegenerateFitError as exc:
            fits[name] = str(exc)
    config = {
        "n_list": [int(n) for n in n_list],
        "k": None if k is None else int(k),
        "fields": list(labels),
        "precision": precision,
    }
    return SweepResult(records=records, fits=fits, field_labels=labels, config=config)


# ---------------------------------------------------------------------------
# serialization of sweep results


def _csv_number(x: float) -> str:
    if isinstance(x, float) and not math.isfinite(x):
        return ""
    return format(float(x), ".17g")


def sweep_csv(result: SweepResult) -> str:
    """Render sweep records as CSV.

    The wall_ms column is left empty on purpose: wall time varies from
    run to run, and the CSV is the reproducibility surface — identical
    configs must produce byte-identical files. Measured timings are in
    the JSON report.
    """
    cols = ["delta", "N", "M", "C_delta", "C_delta_paper"]
    cols += [f"Cf_{label}" for label in result.field_labels]
    cols += ["sigma_min", "precision_bits", "wall_ms"]
    lines = [",".join(cols)]
    for r in result.records:
        row = [_csv_number(r.delta), str(r.n_cells), str(r.n_samples),
               _csv_number(r.c_delta), _csv_number(r.c_delta_paper)]
        row += [_csv_number(r.cf.get(label, math.nan)) for label in result.field_labels]
        row += [_csv_number(r.sigma_min), str(r.precision_bits), ""]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def sweep_report(result: SweepResult) -> dict:
    """JSON-ready mirror of a sweep: records with timings, fits, config."""
    def scrub(x: float):
        return None if isinstance(x, float) and not math.isfinite(x) else x

    records = []
    for r in result.records:
        records.append({
            "delta": r.delta, "N": r.n_cells, "M": r.n_samples,
            "C_delta": scrub(r.c_delta), "C_delta_paper": scrub(r.c_delta_paper),
            "Cf": {label: scrub(v) for label, v in r.cf.items()},
            "Cf_paper": {label: scrub(v) for label, v in r.cf_paper.items()},
            "sigma_min": scrub(r.sigma_min), "precision_bits": r.precision_bits,
            "wall_ms": r.wall_ms, "errors": list(r.errors),
        })
    fits = {}
    for name, fit in result.fits.items():
        if isinstance(fit, FitResult):
            fits[name] = {"gamma": fit.gamma, "beta": fit.beta, "alpha": fit.alpha,
                          "residual_rms": fit.residual_rms, "n_points": fit.n_points}
        else:
            fits[name] = {"error": fit}
    return {"config": result.config, "records": records, "fits": fits}
