"""
Post-sensing compression baselines and visibility noise.

Both reduce an already-formed visibility vector: a dense complex Gaussian
projection, and baseline-dependent averaging of low-frequency visibilities
over consecutive batches.
"""

import logging
from typing import Optional

import numpy as np
from scipy import sparse

from src.operators.base import LinearOp
from src.operators.fourier import VisibilityPlan
from src.seeding import make_rng

logger = logging.getLogger(__name__)

GAUSSIAN_BLOCK_ENTRIES = 2 ** 22


class GaussianProjection(LinearOp):
    """
    Seeded complex Gaussian matrix A with entries CN(0, 1/P), never stored.

    Rows are regenerated block by block from derived streams, so forward
    and adjoint see the same matrix.
    """

    def __init__(self, num_inputs: int, num_projections: int, seed: int, block_rows: Optional[int] = None):
        self.seed = seed
        self.block_rows = block_rows or max(1, GAUSSIAN_BLOCK_ENTRIES // max(num_inputs, 1))
        super().__init__((num_projections, num_inputs), name="A")

    def _block(self, index: int, rows: int) -> np.ndarray:
        rng = make_rng(self.seed, "gaussian", index)
        scale = np.sqrt(0.5 / self.shape[0])
        return scale * (rng.standard_normal((rows, self.shape[1]))
                        + 1j * rng.standard_normal((rows, self.shape[1])))

    def _blocks(self):
        for index, start in enumerate(range(0, self.shape[0], self.block_rows)):
            stop = min(start + self.block_rows, self.shape[0])
            yield slice(start, stop), self._block(index, stop - start)

    def _apply(self, v):
        out = np.empty(self.shape[0], dtype=np.complex128)
        for rows, block in self._blocks():
            out[rows] = block @ v
        return out

    def _apply_adjoint(self, y):
        out = np.zeros(self.shape[1], dtype=np.complex128)
        for rows, block in self._blocks():
            out += block.conj().T @ y[rows]
        return out


def gaussian_postsensing(seed: int, v: np.ndarray, num_projections: int) -> np.ndarray:
    """y = A v with A seeded complex Gaussian (variance 1/P entries)."""
    v = np.asarray(v)
    return GaussianProjection(v.size, num_projections, seed).forward(v)


def averaging_matrix(
    plan: VisibilityPlan,
    freq_threshold: float,
    group_size: int,
    keep_dc_rows: bool = True,
) -> sparse.csr_matrix:
    """
    Selection matrix S of baseline-dependent averaging.

    Batches are split into consecutive groups of ``group_size`` (the last
    group may be shorter). Within a group, rows whose frequency norm stays
    below ``freq_threshold`` (grid units) in every batch are replaced by
    their mean; the other rows pass through. Output rows of a group list the
    pass-through rows in input order, then one averaged row per averaged
    baseline.

    Args:
        plan: Visibility plan
        freq_threshold: Averaging threshold on |chi|
        group_size: Number of consecutive batches per group
        keep_dc_rows: Keep diagonal rows; when False they are dropped

    Returns:
        Sparse (rows_out, B * Q^2) matrix
    """
    if group_size < 1:
        raise ValueError(f"group_size must be >= 1, got {group_size}")

    q2 = plan.rows_per_batch
    norms = np.linalg.norm(plan.frequencies, axis=1).reshape(plan.num_batches, q2)
    diagonal = ~plan.offdiagonal_mask[:q2]

    rows, cols, data = [], [], []
    out_row = 0
    for start in range(0, plan.num_batches, group_size):
        group = np.arange(start, min(start + group_size, plan.num_batches))
        averaged = np.all(norms[group] < freq_threshold, axis=0)
        keep = np.ones(q2, dtype=bool) if keep_dc_rows else ~diagonal

        for b in group:
            for r in np.flatnonzero(~averaged & keep):
                rows.append(out_row)
                cols.append(b * q2 + r)
                data.append(1.0)
                out_row += 1

        weight = 1.0 / len(group)
        for r in np.flatnonzero(averaged & keep):
            for b in group:
                rows.append(out_row)
                cols.append(b * q2 + r)
                data.append(weight)
            out_row += 1

    return sparse.csr_matrix((data, (rows, cols)), shape=(out_row, plan.num_rows))


def averaging_operator(
    plan: VisibilityPlan,
    freq_threshold: float,
    group_size: int,
    keep_dc_rows: bool = True,
) -> LinearOp:
    """Baseline-dependent averaging S as a LinearOp."""
    matrix = averaging_matrix(plan, freq_threshold, group_size, keep_dc_rows)
    adjoint = matrix.T.tocsr()
    return LinearOp(
        matrix.shape,
        forward=lambda v: matrix @ v,
        adjoint=lambda y: adjoint @ y,
        name="S",
    )


def baseline_dependent_averaging(
    plan: VisibilityPlan,
    v: np.ndarray,
    freq_threshold: float,
    group_size: int,
    keep_dc_rows: bool = True,
) -> np.ndarray:
    """Average low-frequency visibilities over groups of consecutive batches."""
    matrix = averaging_matrix(plan, freq_threshold, group_size, keep_dc_rows)
    reduced = matrix @ np.asarray(v)
    logger.info(f"Baseline-dependent averaging: {plan.num_rows} -> {matrix.shape[0]} visibilities")
    return reduced


def add_visibility_noise(v: np.ndarray, sigma: float, seed: int, num_antennas: int) -> np.ndarray:
    """
    Add CN(0, sigma^2) noise, Hermitian-symmetrized per batch.

    The noise matrix of each batch is (W + W^*) / sqrt(2) for W with i.i.d.
    CN(0, sigma^2) entries, which keeps the per-entry variance at sigma^2.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    v = np.asarray(v, dtype=np.complex128)
    if sigma == 0:
        return v.copy()

    q2 = num_antennas ** 2
    if v.size % q2:
        raise ValueError(f"Vector length {v.size} is not a multiple of Q^2 = {q2}")

    rng = make_rng(seed, "visibility-noise")
    shape = (v.size // q2, num_antennas, num_antennas)
    w = sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    noise = (w + np.conj(np.swapaxes(w, 1, 2))) / np.sqrt(2.0)
    return v + noise.ravel()
