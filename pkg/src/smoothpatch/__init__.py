"""C^s-smooth mixed degree and regularity spline spaces on planar multi-patch domains."""
from .errors import (ApproximationFailureError, AssemblyError, DegenerateGeometryError,
                     InconsistentTraceError, InvalidArgumentError, SingularSystemError,
                     SmoothPatchError, UndefinedNormError, UnsupportedTopologyError)
from .fields import ExactField
from .galerkin import (BoundaryData, ConvergenceReport, SolverConfig, compute_errors,
                       convergence_study, solve_pde)
from .geometry import MultiPatchDomain, builtin_domain, load_domain
from .mixed2d import MixedSpace2D, build_mixed_2d, mixed_dimension
from .smoothspace import SmoothSpace, assemble_smooth_space
from .univariate import UnivariateSpace, build_mixed_1d, representation_matrix

__version__ = "0.1.0"

__all__ = [
    "ApproximationFailureError", "AssemblyError", "DegenerateGeometryError",
    "InconsistentTraceError", "InvalidArgumentError", "SingularSystemError", "SmoothPatchError",
    "UndefinedNormError", "UnsupportedTopologyError",
    "ExactField", "BoundaryData", "ConvergenceReport", "SolverConfig", "compute_errors",
    "convergence_study", "solve_pde",
    "MultiPatchDomain", "builtin_domain", "load_domain",
    "MixedSpace2D", "build_mixed_2d", "mixed_dimension",
    "SmoothSpace", "assemble_smooth_space",
    "UnivariateSpace", "build_mixed_1d", "representation_matrix",
]
