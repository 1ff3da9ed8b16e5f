"""
Sparse recovery: BPDN by lambda-continuation and FISTA.
"""

from .bpdn import (
    SolverConfig,
    SolverResult,
    OuterStep,
    estimate_lipschitz,
    fista_lasso,
    solve_bpdn,
)
from .oracle import dense_operator, exhaustive_support_search

__all__ = [
    "SolverConfig",
    "SolverResult",
    "OuterStep",
    "estimate_lipschitz",
    "fista_lasso",
    "solve_bpdn",
    "dense_operator",
    "exhaustive_support_search",
]
