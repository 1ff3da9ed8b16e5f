"""
Sketching vectors and modulation patterns for rank-one projections.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from src.seeding import make_rng

logger = logging.getLogger(__name__)


class SketchDistribution(str, Enum):
    """Distribution of the sketch entries."""
    PHASE = "phase"
    GAUSSIAN = "gaussian"


def draw_sketches(rng: np.random.Generator, shape, distribution: SketchDistribution) -> np.ndarray:
    """Unit-modulus phases or standard complex Gaussian entries."""
    if distribution == SketchDistribution.PHASE:
        return np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=shape))
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def rademacher(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. +/-1 entries."""
    return np.where(rng.random(shape) < 0.5, -1.0, 1.0)


@dataclass(frozen=True)
class SketchEnsemble:
    """
    Per-batch sketching vectors and the modulation matrix.

    Attributes:
        alphas: (B, P, Q) left sketches alpha_pb
        betas: (B, P, Q) right sketches beta_pb
        modulations: (B, M) matrix Gamma with +/-1 entries
        seed: Master seed the ensemble was drawn from
        distribution: Sketch entry distribution
    """
    alphas: np.ndarray
    betas: np.ndarray
    modulations: np.ndarray
    seed: Optional[int] = None
    distribution: SketchDistribution = SketchDistribution.PHASE

    def __post_init__(self):
        alphas = np.array(self.alphas, dtype=np.complex128)
        betas = np.array(self.betas, dtype=np.complex128)
        gamma = np.array(self.modulations, dtype=np.float64)

        if alphas.ndim != 3 or alphas.shape != betas.shape:
            raise ValueError(
                f"alphas and betas must share a (B, P, Q) shape, got {alphas.shape} and {betas.shape}"
            )
        if gamma.ndim != 2 or gamma.shape[0] != alphas.shape[0]:
            raise ValueError(
                f"modulations must have shape (B={alphas.shape[0]}, M), got {gamma.shape}"
            )
        if not np.all(np.abs(gamma) == 1.0):
            raise ValueError("Modulation entries must be +1 or -1")

        for array in (alphas, betas, gamma):
            array.setflags(write=False)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "modulations", gamma)
        object.__setattr__(self, "distribution", SketchDistribution(self.distribution))

    @classmethod
    def draw(
        cls,
        num_antennas: int,
        num_projections: int,
        num_batches: int,
        num_modulations: int,
        seed: int,
        distribution: SketchDistribution = SketchDistribution.PHASE,
    ) -> "SketchEnsemble":
        """
        Draw sketches and a Rademacher modulation matrix.

        Each batch's sketches come from their own derived stream, so a batch
        gets the same vectors whatever B is.

        Args:
            num_antennas: Q
            num_projections: P
            num_batches: B
            num_modulations: M
            seed: Master seed
            distribution: Sketch entry distribution

        Returns:
            SketchEnsemble
        """
        if min(num_antennas, num_projections, num_batches, num_modulations) < 1:
            raise ValueError(
                f"Q, P, B and M must be >= 1, got {(num_antennas, num_projections, num_batches, num_modulations)}"
            )
        distribution = SketchDistribution(distribution)
        shape = (num_projections, num_antennas)
        alphas = np.empty((num_batches,) + shape, dtype=np.complex128)
        betas = np.empty_like(alphas)
        for b in range(num_batches):
            rng = make_rng(seed, "sketch", b)
            alphas[b] = draw_sketches(rng, shape, distribution)
            betas[b] = draw_sketches(rng, shape, distribution)

        gamma = rademacher(make_rng(seed, "modulation"), (num_batches, num_modulations))
        return cls(alphas, betas, gamma, seed=seed, distribution=distribution)

    @property
    def num_batches(self) -> int:
        return int(self.alphas.shape[0])

    @property
    def num_projections(self) -> int:
        return int(self.alphas.shape[1])

    @property
    def num_antennas(self) -> int:
        return int(self.alphas.shape[2])

    @property
    def num_modulations(self) -> int:
        return int(self.modulations.shape[1])

    @property
    def measurement_count(self) -> int:
        """Length P * M of the compressive measurement vector."""
        return self.num_projections * self.num_modulations

    def with_modulations(self, modulations: np.ndarray) -> "SketchEnsemble":
        return SketchEnsemble(self.alphas, self.betas, modulations, self.seed, self.distribution)

    def integrated(self) -> "SketchEnsemble":
        """Same sketches with Gamma = all-ones (M = 1), the IROP aggregation."""
        return self.with_modulations(np.ones((self.num_batches, 1)))

    def shared(self) -> "SketchEnsemble":
        """Batch-1 sketches repeated over every batch."""
        alphas = np.broadcast_to(self.alphas[:1], self.alphas.shape)
        betas = np.broadcast_to(self.betas[:1], self.betas.shape)
        return SketchEnsemble(alphas, betas, self.modulations, self.seed, self.distribution)

    def metadata(self) -> dict:
        return {
            "P": self.num_projections,
            "M": self.num_modulations,
            "B": self.num_batches,
            "Q": self.num_antennas,
            "seed": self.seed,
            "distribution": self.distribution.value,
        }


def structured_sketch_ratio(num_projections: int, num_modulations: int, num_antennas: int) -> float:
    """
    Free parameters of modulated per-batch sketches relative to fully
    independent global sketches of the block-diagonal matrix: 1/M + 1/(PQ).
    """
    return 1.0 / num_modulations + 1.0 / (num_projections * num_antennas)
