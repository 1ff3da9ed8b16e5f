"""
Brute-force sparse recovery for tiny dense problems.

Enumerates every support of the given size, fits it by least squares and
keeps the one with the smallest residual. Cost grows as C(n, K); meant only
as a reference for checking solve_bpdn.
"""

import logging
from itertools import combinations
from math import comb
from typing import Optional

import numpy as np

from src.errors import ResourceGuardError
from src.operators.base import LinearOp

logger = logging.getLogger(__name__)

MAX_SUPPORTS = 200_000


def dense_operator(matrix: np.ndarray, name: str = "dense") -> LinearOp:
    """Real-domain LinearOp backed by an explicit matrix."""
    matrix = np.asarray(matrix)
    return LinearOp(
        matrix.shape,
        forward=lambda x: matrix @ x,
        adjoint=lambda y: matrix.conj().T @ y,
        name=name,
        real_domain=True,
    )


def exhaustive_support_search(
    matrix: np.ndarray,
    z: np.ndarray,
    sparsity: int,
    nonneg: bool = True,
    max_supports: int = MAX_SUPPORTS,
) -> np.ndarray:
    """
    Best K-sparse least-squares fit over all supports.

    Args:
        matrix: Dense sensing matrix (m x n)
        z: Measurements
        sparsity: Support size K
        nonneg: Discard supports whose fit has a negative coefficient
        max_supports: Refuse larger enumerations

    Returns:
        Length-n estimate

    Raises:
        ResourceGuardError: If C(n, K) exceeds max_supports
    """
    matrix = np.asarray(matrix)
    n = matrix.shape[1]
    total = comb(n, sparsity)
    if total > max_supports:
        raise ResourceGuardError(f"C({n}, {sparsity}) = {total} supports exceeds {max_supports}")

    best: Optional[np.ndarray] = None
    best_residual = np.inf
    for support in combinations(range(n), sparsity):
        columns = matrix[:, support]
        coef = np.linalg.lstsq(columns, z, rcond=None)[0]
        if np.iscomplexobj(coef):
            coef = coef.real
        if nonneg and np.any(coef < 0):
            continue
        residual = np.linalg.norm(z - columns @ coef)
        if residual < best_residual:
            best_residual = residual
            best = np.zeros(n)
            best[list(support)] = coef

    if best is None:
        logger.warning("No support admits a nonnegative fit")
        return np.zeros(n)
    logger.debug(f"Exhaustive search over {total} supports: residual {best_residual:.3e}")
    return best
