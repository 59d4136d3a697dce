"""Magnetic potentials of box-simple magnetizations.

Forward evaluation of the Newtonian magnetic potential for
piecewise-constant (box-simple) and smooth magnetizations on the unit
cube, exactly invisible reference fields, a dense boundary-sampled
forward operator with certified least-squares inversion, and the
discretization-stability experiment measuring the growth of the
constant C(delta).
"""

from .geometry import (DOMAIN, SURFACE_AREA, Ball, Box, Lattice, RigidMotion,
                       SurfaceGrid, build_lattice, lattice_from_delta, surface_grid)
from .kernels import (EdgeEvaluationError, KERNEL_CONVENTION, PrismPotentialTable,
                      ball_dipole_potential, grad_newton, newton_kernel,
                      prism_potential)
from .fields import (BoxSimpleField, FieldParseError, LatticeField, NestedBallField,
                     PrismField, SmoothField, box_simple, bump_gradient, discretize,
                     field_from_json, field_to_json, invisible_ball_field,
                     invisible_triangle_field, thickness_ambiguity_pair)
from .forward import (AssemblyError, ForwardMatrix, QuadratureError, QuadratureSpec,
                      apply_forward, assemble, boundary_l2_norm, integrate_box,
                      load_matrix, net_moment_quadrature, potential,
                      potential_box_simple, potential_quadrature, potential_scale,
                      save_matrix, smooth_l1_norm, transform_field)
from .stability import (CertificationError, DegenerateFitError, FieldRatio,
                        FitResult, OperatorConstants, StabilityRecord, SweepResult,
                        ZeroPotentialError, field_ratio_cf, fit_exponential, invert,
                        operator_constant, sweep, sweep_csv, sweep_report)

__version__ = "0.1.0"

__all__ = [
    "DOMAIN", "SURFACE_AREA", "Ball", "Box", "Lattice", "RigidMotion",
    "SurfaceGrid", "build_lattice", "lattice_from_delta", "surface_grid",
    "EdgeEvaluationError", "KERNEL_CONVENTION", "PrismPotentialTable",
    "ball_dipole_potential", "grad_newton", "newton_kernel", "prism_potential",
    "BoxSimpleField", "FieldParseError", "LatticeField", "NestedBallField",
    "PrismField", "SmoothField", "box_simple", "bump_gradient", "discretize",
    "field_from_json", "field_to_json", "invisible_ball_field",
    "invisible_triangle_field", "thickness_ambiguity_pair",
    "AssemblyError", "ForwardMatrix", "QuadratureError", "QuadratureSpec",
    "apply_forward", "assemble", "boundary_l2_norm", "integrate_box",
    "load_matrix", "net_moment_quadrature", "potential", "potential_box_simple",
    "potential_quadrature", "potential_scale", "save_matrix", "smooth_l1_norm",
    "transform_field",
    "CertificationError", "DegenerateFitError", "FieldRatio", "FitResult",
    "OperatorConstants", "StabilityRecord", "SweepResult", "ZeroPotentialError",
    "field_ratio_cf", "fit_exponential", "invert", "operator_constant", "sweep",
    "sweep_csv", "sweep_report",
    "__version__",
]
