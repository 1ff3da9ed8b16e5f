"""
Rank-one projection and modulation operators.

Visibility vectors are batch-major with Q^2 rows per batch; unvec of a batch
block (row-major) is the Q x Q interferometric matrix V_b. ROP vectors are
ordered b * P + p and modulated measurements m * P + p.
"""

import logging
from typing import TYPE_CHECKING

import numpy as np

from src.errors import DimensionMismatchError
from src.operators.base import LinearOp, map_ordered

if TYPE_CHECKING:
    from src.acquisition.sketches import SketchEnsemble

logger = logging.getLogger(__name__)


def rop_block(alphas: np.ndarray, betas: np.ndarray, v_b: np.ndarray) -> np.ndarray:
    """
    ROP measurements y_p = alpha_p^* V_b beta_p of one batch.

    Args:
        alphas: (P, Q) left sketches
        betas: (P, Q) right sketches
        v_b: Flat visibilities of the batch, length Q^2

    Returns:
        (P,) measurements
    """
    q = alphas.shape[1]
    if v_b.size != q * q:
        raise DimensionMismatchError(f"Batch block has {v_b.size} entries, expected {q * q}")
    matrix = v_b.reshape(q, q)
    return np.einsum("pj,pj->p", alphas.conj(), betas @ matrix.T)


def rop_block_adjoint(alphas: np.ndarray, betas: np.ndarray, y_b: np.ndarray) -> np.ndarray:
    """Rank-one accumulation sum_p y_p vec(alpha_p beta_p^*)."""
    if y_b.size != alphas.shape[0]:
        raise DimensionMismatchError(f"Got {y_b.size} measurements for {alphas.shape[0]} sketches")
    return np.einsum("p,pj,pk->jk", y_b, alphas, betas.conj()).ravel()


class BlockROP(LinearOp):
    """
    Block-diagonal ROP operator D = diag(R_1, ..., R_B): C^{BQ^2} -> C^{BP}.

    With ``workers > 1`` contiguous batch ranges run on a thread pool; the
    blocks are independent, so the output does not depend on ``workers``.
    """

    def __init__(self, sketches: "SketchEnsemble", workers: int = 1):
        self.sketches = sketches
        b, p, q = sketches.alphas.shape
        self.workers = max(1, int(workers))
        bounds = np.linspace(0, b, min(self.workers, b) + 1).astype(int)
        self._ranges = [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        super().__init__((b * p, b * q * q), name="D")

    def _apply(self, v):
        s = self.sketches
        q = s.num_antennas
        matrices = v.reshape(s.num_batches, q, q)

        def project(rows: slice) -> np.ndarray:
            right = np.einsum("bjk,bpk->bpj", matrices[rows], s.betas[rows])
            return np.einsum("bpj,bpj->bp", s.alphas[rows].conj(), right).ravel()

        return np.concatenate(map_ordered(project, self._ranges, self.workers))

    def _apply_adjoint(self, y):
        s = self.sketches
        y = y.reshape(s.num_batches, s.num_projections)

        def lift(rows: slice) -> np.ndarray:
            return np.einsum("bp,bpj,bpk->bjk", y[rows], s.alphas[rows], s.betas[rows].conj()).ravel()

        return np.concatenate(map_ordered(lift, self._ranges, self.workers))

    def dense_rows(self, b: int) -> np.ndarray:
        """Dense (P, Q^2) matrix of batch ``b``: row p is vec(alpha beta^*)^H."""
        s = self.sketches
        return np.einsum("pj,pk->pjk", s.alphas[b].conj(), s.betas[b]).reshape(s.num_projections, -1)


class Modulation(LinearOp):
    """
    Modulation operator M = Gamma^T (x) Id_P: C^{BP} -> C^{MP}.

    Forward z_m = sum_b Gamma_bm y_b; adjoint y_b = sum_m Gamma_bm z_m.
    """

    def __init__(self, modulations: np.ndarray, num_projections: int):
        self.modulations = np.asarray(modulations, dtype=np.float64)
        self.num_projections = num_projections
        b, m = self.modulations.shape
        super().__init__((m * num_projections, b * num_projections), name="M")

    def _apply(self, y):
        blocks = y.reshape(self.modulations.shape[0], self.num_projections)
        return (self.modulations.T @ blocks).ravel()

    def _apply_adjoint(self, z):
        blocks = z.reshape(self.modulations.shape[1], self.num_projections)
        return (self.modulations @ blocks).ravel()


def modulation_op(modulations: np.ndarray, y: np.ndarray, num_projections: int) -> np.ndarray:
    """Aggregate per-batch ROP vectors with the modulation matrix."""
    return Modulation(modulations, num_projections).forward(np.asarray(y))


class OffDiagonalSelector(LinearOp):
    """G0 row selection: keeps the Q(Q-1) off-diagonal rows of every batch."""

    def __init__(self, num_antennas: int, num_batches: int):
        self.num_antennas = num_antennas
        self.num_batches = num_batches
        self.mask = np.tile(~np.eye(num_antennas, dtype=bool).ravel(), num_batches)
        rows = num_antennas * (num_antennas - 1) * num_batches
        super().__init__((rows, num_antennas ** 2 * num_batches), name="S0")

    def _apply(self, v):
        return v[self.mask]

    def _apply_adjoint(self, w):
        out = np.zeros(self.shape[1], dtype=np.result_type(w, np.complex128))
        out[self.mask] = w
        return out
