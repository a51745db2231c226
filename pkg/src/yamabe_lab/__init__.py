"""Numerical Yamabe-energy laboratory on S^1(L) x S^{n-1}(1)."""

__version__ = "0.1.0"

from .energy import (
    conformal_distance,
    conformal_distance_star,
    distance_to_set,
    el_residual,
    energy_report,
    gradient,
    multiplier,
    normalize_volume,
    tangent_project,
    yamabe_energy,
)
from .hessian import Spectrum, hessian_apply, hessian_spectrum
from .manifold import DomainError, Manifold, conformal_laplacian, make_product_manifold
from .reduction import (
    LyapunovSchmidt,
    ReducedModel,
    check_ASp,
    classify_integrability,
    reduce,
    reduced_energy,
    solve_graph_map,
    taylor_of_q,
)
from .solver import (
    BifurcationDiagram,
    CriticalPoint,
    SolverOptions,
    continuation,
    find_minimizers,
    minimize,
    newton_critical_point,
)
from .spectral import Field, Grid, derivative, inner_products, integrate, laplacian
from .stability import (
    StabilityFit,
    decompose_deficit,
    fit_exponent,
    lojasiewicz_check,
    sample_deficit_distance,
    superquadratic_family,
)

__all__ = [
    "__version__",
    "BifurcationDiagram",
    "check_ASp",
    "classify_integrability",
    "conformal_distance",
    "conformal_distance_star",
    "conformal_laplacian",
    "continuation",
    "CriticalPoint",
    "decompose_deficit",
    "derivative",
    "distance_to_set",
    "DomainError",
    "el_residual",
    "energy_report",
    "Field",
    "find_minimizers",
    "fit_exponent",
    "gradient",
    "Grid",
    "hessian_apply",
    "hessian_spectrum",
    "inner_products",
    "integrate",
    "laplacian",
    "lojasiewicz_check",
    "LyapunovSchmidt",
    "make_product_manifold",
    "Manifold",
    "minimize",
    "multiplier",
    "newton_critical_point",
    "normalize_volume",
    "reduce",
    "reduced_energy",
    "ReducedModel",
    "sample_deficit_distance",
    "solve_graph_map",
    "SolverOptions",
    "Spectrum",
    "StabilityFit",
    "superquadratic_family",
    "tangent_project",
    "taylor_of_q",
    "yamabe_energy",
]
