"""
Acquisition operators: classical visibilities and compressive MROP sensing.

Inputs are sequences of SignalBatch (time samples) or SampleCovariance
(precomputed or exact covariances). The compressive path only forms
beamformed sketches of the samples and never builds a covariance matrix.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Union

import numpy as np

from src.acquisition.signals import (
    SAMPLE_CHUNK,
    SampleCovariance,
    SignalBatch,
    sample_covariance,
)
from src.acquisition.sketches import SketchEnsemble
from src.errors import DimensionMismatchError
from src.operators.fourier import VisibilityPlan
from src.operators.models import interferometric_matrix
from src.operators.rop import Modulation
from src.sky.model import SkyImage

logger = logging.getLogger(__name__)

BatchInput = Union[SignalBatch, SampleCovariance]


def _num_antennas(items: Sequence[BatchInput]) -> int:
    if not items:
        raise ValueError("At least one batch is required")
    sizes = {item.num_antennas for item in items}
    if len(sizes) != 1:
        raise DimensionMismatchError(f"Inconsistent antenna counts across batches: {sorted(sizes)}")
    return sizes.pop()


def _resolve_noise(noise_cov: Optional[np.ndarray], num_antennas: int) -> np.ndarray:
    if noise_cov is None:
        return np.zeros((num_antennas, num_antennas), dtype=np.complex128)
    noise_cov = np.asarray(noise_cov, dtype=np.complex128)
    if noise_cov.shape != (num_antennas, num_antennas):
        raise DimensionMismatchError(
            f"Noise covariance shape {noise_cov.shape} does not match Q={num_antennas}"
        )
    return noise_cov


def _covariance_matrix(item: BatchInput) -> np.ndarray:
    if isinstance(item, SampleCovariance):
        return item.matrix
    return sample_covariance(item).matrix


def exact_covariances(
    img: SkyImage,
    plan: VisibilityPlan,
    noise_cov: Optional[np.ndarray] = None,
) -> List[SampleCovariance]:
    """Expected covariance I_b + Sigma_n of every batch (the I -> infinity limit)."""
    sigma = _resolve_noise(noise_cov, plan.num_antennas)
    return [
        SampleCovariance(b + 1, interferometric_matrix(img, plan.positions[b], plan.pixel_size) + sigma)
        for b in range(plan.num_batches)
    ]


def classical_acquire(
    items: Sequence[BatchInput],
    noise_cov: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Classical visibility vector: vec(C_b - Sigma_n) of every batch, concatenated.

    Returns:
        Complex vector of length Q^2 B (row-major vec per batch)
    """
    q = _num_antennas(items)
    sigma = _resolve_noise(noise_cov, q)
    return np.concatenate([(_covariance_matrix(item) - sigma).ravel() for item in items])


def _rop_from_samples(samples: np.ndarray, alphas: np.ndarray, betas: np.ndarray) -> np.ndarray:
    # mu_p[i] = alpha_p^* x[i], nu_p[i] = beta_p^* x[i]; y_p = mean mu conj(nu)
    total = np.zeros(alphas.shape[0], dtype=np.complex128)
    for start in range(0, samples.shape[0], SAMPLE_CHUNK):
        chunk = samples[start:start + SAMPLE_CHUNK]
        mu = chunk @ alphas.conj().T
        nu = chunk @ betas.conj().T
        total += np.sum(mu * nu.conj(), axis=0)
    return total / samples.shape[0]


def _rop_from_matrix(matrix: np.ndarray, alphas: np.ndarray, betas: np.ndarray) -> np.ndarray:
    return np.einsum("pj,pj->p", alphas.conj(), betas @ matrix.T)


def batch_rops(
    items: Sequence[BatchInput],
    sketches: SketchEnsemble,
    noise_cov: Optional[np.ndarray] = None,
    workers: int = 1,
) -> np.ndarray:
    """
    Bias-corrected ROP vectors y_pb = alpha^*(C_b - Sigma_n) beta of every batch.

    Sample batches are sketched sample by sample; covariance inputs are
    projected directly.

    Returns:
        (B, P) array
    """
    q = _num_antennas(items)
    if len(items) != sketches.num_batches or q != sketches.num_antennas:
        raise DimensionMismatchError(
            f"Sketches sized (B={sketches.num_batches}, Q={sketches.num_antennas}) "
            f"for {len(items)} batches of Q={q}"
        )
    sigma = _resolve_noise(noise_cov, q)

    def run(b: int) -> np.ndarray:
        item = items[b]
        alphas, betas = sketches.alphas[b], sketches.betas[b]
        bias = _rop_from_matrix(sigma, alphas, betas)
        if isinstance(item, SampleCovariance):
            return _rop_from_matrix(item.matrix, alphas, betas) - bias
        return _rop_from_samples(item.samples, alphas, betas) - bias

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        rows = list(pool.map(run, range(len(items))))
    return np.stack(rows)


def compressive_acquire(
    items: Sequence[BatchInput],
    sketches: SketchEnsemble,
    noise_cov: Optional[np.ndarray] = None,
    workers: int = 1,
) -> np.ndarray:
    """
    Compressive measurements z_mp = sum_b Gamma_bm y_pb.

    Args:
        items: Signal batches or covariances, one per sketch batch
        sketches: Sketches and modulation matrix
        noise_cov: Receiver noise covariance whose bias is removed
        workers: Threads used across batches

    Returns:
        Complex vector of length P * M ordered m * P + p
    """
    y = batch_rops(items, sketches, noise_cov, workers)
    modulation = Modulation(sketches.modulations, sketches.num_projections)
    return modulation.forward(y.ravel())


def rop_of_covariances(
    items: Sequence[BatchInput],
    sketches: SketchEnsemble,
    noise_cov: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Reference path forming C_b explicitly: modulate(rop(sample_covariance)).
    """
    covariances = [SampleCovariance(i + 1, _covariance_matrix(item)) for i, item in enumerate(items)]
    return compressive_acquire(covariances, sketches, noise_cov)


def estimate_dc(
    items: Sequence[BatchInput],
    noise_cov: Optional[np.ndarray],
    varpi: float,
) -> float:
    """
    DC estimate from antenna autocorrelations: mean_{q,b} (C_b - Sigma_n)_qq / varpi.
    """
    q = _num_antennas(items)
    sigma = _resolve_noise(noise_cov, q)
    diagonals = [np.real(np.diag(_covariance_matrix(item) - sigma)) for item in items]
    return float(np.mean(np.concatenate(diagonals)) / varpi)


def size_accounting(
    num_antennas: int,
    num_batches: int,
    num_projections: int,
    num_modulations: int,
) -> List[Dict[str, object]]:
    """
    Acquisition cost and storage of the three strategies.

    Returns:
        Rows with the cost per batch, largest intermediate size and output size
    """
    q, b, p, m = num_antennas, num_batches, num_projections, num_modulations
    return [
        {"method": "classical", "cost_per_batch": q * q, "max_size": q * q * b, "output_size": q * q * b},
        {"method": "post-sensing", "cost_per_batch": p * q * q, "max_size": q * q, "output_size": p},
        {"method": "compressive", "cost_per_batch": p * q, "max_size": p * m, "output_size": p * m},
    ]


@dataclass
class MeasurementCovarianceReport:
    """Empirical covariance of repeated measurement vectors."""
    covariance: np.ndarray
    block_size: int
    off_block_energy: float

    def to_dict(self) -> dict:
        return {
            "dimension": int(self.covariance.shape[0]),
            "block_size": self.block_size,
            "off_block_energy": self.off_block_energy,
        }


def empirical_measurement_covariance(samples: np.ndarray, block_size: int) -> MeasurementCovarianceReport:
    """
    Empirical covariance of measurement draws and its energy outside the
    diagonal blocks of size ``block_size``.

    Args:
        samples: (T, m) repeated measurement vectors
        block_size: Block length (P for z ordered m * P + p)
    """
    samples = np.asarray(samples)
    if samples.ndim != 2 or samples.shape[0] < 2:
        raise ValueError("Need at least two measurement draws")
    centered = samples - samples.mean(axis=0)
    covariance = centered.T @ centered.conj() / (samples.shape[0] - 1)

    blocks = np.arange(covariance.shape[0]) // block_size
    off_block = blocks[:, None] != blocks[None, :]
    total = np.linalg.norm(covariance) ** 2
    fraction = float(np.sum(np.abs(covariance[off_block]) ** 2) / total) if total > 0 else 0.0
    return MeasurementCovarianceReport(covariance, block_size, fraction)
