"""
Antenna signal simulation and sample covariances.

Each pixel emits an independent circular Gaussian source with variance
x_n * Delta^2; antenna q receives sum_n exp(+i 2 pi chi_q . s_n / N1) s_n
plus receiver noise, so the expected covariance is the interferometric
matrix plus the noise covariance.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from src.errors import ResourceGuardError
from src.geometry.synthesis import BatchGeometry
from src.operators.fourier import VisibilityPlan
from src.operators.models import steering_matrix
from src.seeding import derive_seed
from src.sky.model import SkyImage

logger = logging.getLogger(__name__)

DEFAULT_SAMPLE_BUDGET = 10 ** 10
SAMPLE_CHUNK = 4096


def noise_covariance(num_antennas: int, sigma: float = 0.0) -> np.ndarray:
    """Receiver noise covariance sigma^2 * Id."""
    return (sigma ** 2) * np.eye(num_antennas, dtype=np.complex128)


def _check_noise_covariance(matrix: np.ndarray, num_antennas: int) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.complex128)
    if matrix.shape != (num_antennas, num_antennas):
        raise ValueError(f"Noise covariance must be {num_antennas}x{num_antennas}, got {matrix.shape}")
    if not np.allclose(matrix, matrix.conj().T, atol=1e-12):
        raise ValueError("Noise covariance must be Hermitian")
    if np.linalg.eigvalsh(matrix).min() < -1e-10:
        raise ValueError("Noise covariance must be positive semidefinite")
    return matrix


@dataclass(frozen=True)
class SignalBatch:
    """
    Time samples received during one batch.

    Attributes:
        batch_index: 1-based batch number
        samples: (I, Q) complex samples x_b[i]
        noise_covariance: (Q, Q) Hermitian PSD receiver noise covariance
    """
    batch_index: int
    samples: np.ndarray
    noise_covariance: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.complex128)
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError(f"samples must have shape (I >= 1, Q), got {samples.shape}")
        sigma = _check_noise_covariance(self.noise_covariance, samples.shape[1])
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "noise_covariance", sigma)

    @property
    def num_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def num_antennas(self) -> int:
        return int(self.samples.shape[1])


@dataclass(frozen=True)
class SampleCovariance:
    """Covariance matrix C_b of one batch (sample or exact)."""
    batch_index: int
    matrix: np.ndarray

    def __post_init__(self):
        matrix = np.asarray(self.matrix, dtype=np.complex128)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Covariance must be square, got {matrix.shape}")
        object.__setattr__(self, "matrix", matrix)

    @property
    def num_antennas(self) -> int:
        return int(self.matrix.shape[0])


def _noise_root(sigma: np.ndarray) -> Optional[np.ndarray]:
    if not np.any(sigma):
        return None
    w, u = np.linalg.eigh(sigma)
    return u * np.sqrt(np.clip(w, 0.0, None))


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def simulate_antenna_signals(
    img: SkyImage,
    positions: np.ndarray,
    num_samples: int,
    noise_cov: Optional[np.ndarray] = None,
    seed: int = 0,
    batch_index: int = 1,
    budget: int = DEFAULT_SAMPLE_BUDGET,
    chunk: int = SAMPLE_CHUNK,
) -> SignalBatch:
    """
    Simulate I samples at antennas with grid-unit positions.

    Args:
        img: Sky image
        positions: (Q, 2) antenna positions in grid units
        num_samples: Number of samples I
        noise_cov: Receiver noise covariance (zero when omitted)
        seed: Generator seed for this batch
        batch_index: 1-based batch number
        budget: Maximum Q * N * I
        chunk: Samples generated per step

    Returns:
        SignalBatch

    Raises:
        ResourceGuardError: If Q * N * I exceeds the budget
    """
    q = positions.shape[0]
    if num_samples < 1:
        raise ValueError(f"num_samples must be >= 1, got {num_samples}")
    work = q * img.pixel_count * num_samples
    if work > budget:
        raise ResourceGuardError(
            f"Simulation needs Q*N*I = {work:.3g} products, budget is {budget:.3g}; "
            f"reduce Q (={q}), N (={img.pixel_count}) or I (={num_samples})"
        )

    sigma = noise_cov if noise_cov is not None else noise_covariance(q)
    sigma = _check_noise_covariance(sigma, q)
    root = _noise_root(sigma)

    support = img.support
    steering = steering_matrix(positions, img.side, support)  # (Q, K)
    source_std = img.pixel_size * np.sqrt(img.values[support])

    rng = np.random.default_rng(seed)
    samples = np.zeros((num_samples, q), dtype=np.complex128)
    for start in range(0, num_samples, chunk):
        rows = slice(start, min(start + chunk, num_samples))
        count = rows.stop - rows.start
        if support.size:
            sources = _complex_normal(rng, (count, support.size)) * source_std
            samples[rows] = sources @ steering.T
        if root is not None:
            samples[rows] += _complex_normal(rng, (count, q)) @ root.T

    return SignalBatch(batch_index=batch_index, samples=samples, noise_covariance=sigma)


def simulate_batch(
    img: SkyImage,
    geom: BatchGeometry,
    num_samples: int,
    noise_cov: Optional[np.ndarray] = None,
    seed: int = 0,
    scale: float = 1.0,
    budget: int = DEFAULT_SAMPLE_BUDGET,
) -> SignalBatch:
    """
    Simulate one batch from its geometry.

    ``scale`` converts the geometry's wavelength positions to grid units
    (``VisibilityPlan.scale``).
    """
    return simulate_antenna_signals(
        img,
        geom.positions * scale,
        num_samples,
        noise_cov=noise_cov,
        seed=seed,
        batch_index=geom.batch_index,
        budget=budget,
    )


def simulate_observation(
    img: SkyImage,
    plan: VisibilityPlan,
    num_samples: int,
    noise_cov: Optional[np.ndarray] = None,
    seed: int = 0,
    workers: int = 1,
    budget: int = DEFAULT_SAMPLE_BUDGET,
) -> List[SignalBatch]:
    """
    Simulate every batch of a plan with per-batch derived seeds.

    Output does not depend on ``workers``.
    """
    if img.side != plan.side:
        raise ValueError(f"Image side {img.side} does not match plan side {plan.side}")

    def run(b: int) -> SignalBatch:
        return simulate_antenna_signals(
            img,
            plan.positions[b],
            num_samples,
            noise_cov=noise_cov,
            seed=derive_seed(seed, "signal", b),
            batch_index=b + 1,
            budget=budget,
        )

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        batches = list(pool.map(run, range(plan.num_batches)))

    logger.info(f"✓ Simulated {len(batches)} batches x {num_samples} samples")
    return batches


def sample_covariance(batch: SignalBatch) -> SampleCovariance:
    """C_b = (1/I) sum_i x[i] x[i]^*, symmetrized to be exactly Hermitian."""
    x = batch.samples
    matrix = (x.T @ x.conj()) / batch.num_samples
    return SampleCovariance(batch.batch_index, 0.5 * (matrix + matrix.conj().T))
