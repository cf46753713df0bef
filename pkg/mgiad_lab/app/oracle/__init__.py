"""
Classical linear multigrid on Poisson problems and its correspondence with
the block code run in linear mode.
"""

from .correspondence import (
    CorrespondenceReport,
    assemble_sic_matrices,
    build_linear_model,
    channel_cycle_check,
    correspondence_check,
    fas_collapse_check,
    level_stencils,
    sic_matrix_check,
)
from .multigrid import (
    ContractionReport,
    GridHierarchy,
    coarsening_leg,
    jacobi_smooth,
    measure_contraction,
    smoothing_factor,
    two_grid_matrix,
    vcycle,
)
from .poisson import PoissonProblem, poisson_matrix

__all__ = [
    "ContractionReport",
    "CorrespondenceReport",
    "GridHierarchy",
    "PoissonProblem",
    "assemble_sic_matrices",
    "build_linear_model",
    "channel_cycle_check",
    "coarsening_leg",
    "correspondence_check",
    "fas_collapse_check",
    "jacobi_smooth",
    "level_stencils",
    "measure_contraction",
    "poisson_matrix",
    "sic_matrix_check",
    "smoothing_factor",
    "two_grid_matrix",
    "vcycle",
]
