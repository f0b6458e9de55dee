"""Convolutional sparse coding: operators, ADMM reconstruction, filter training."""

from .operators import (
    filter_spectra,
    synthesize,
    synthesize_adjoint,
    temporal_diff,
    temporal_diff_adjoint,
)
from .solver import (
    AdmmState,
    CscParams,
    CscResult,
    QuadraticOperator,
    objective,
    objective_terms,
    prox_data,
    prox_l1,
    reconstruct_csc,
    solve_quadratic,
)
