"""
Empirical l1 concentration of rank-one projections.

For a Hermitian test matrix J and P random sketch pairs, the statistic is

    r = (1/P) sum_p |alpha_p^* J beta_p| / ||J||_F

Its spread over fresh sketch draws shrinks as P grows; the observed range
is reported as an empirical bracket [c1_hat, c2_hat].
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from src.acquisition.sketches import SketchDistribution, draw_sketches
from src.operators.fourier import VisibilityPlan
from src.operators.models import block_interferometric_matrix, hollow
from src.seeding import make_rng
from src.sky.model import random_sparse_sky

logger = logging.getLogger(__name__)

MatrixSource = Union[Sequence[np.ndarray], Callable[[np.random.Generator], np.ndarray]]


@dataclass
class ConcentrationReport:
    """
    Ratio samples for one projection count.

    Attributes:
        num_projections: P
        trials: Number of retained (nonzero-matrix) trials
        ratios: Per-trial ratio samples
        skipped: Zero matrices excluded
        reference_scale: Scaling factor the bracket is compared against, if any
    """
    num_projections: int
    trials: int
    ratios: np.ndarray
    skipped: int = 0
    reference_scale: Optional[float] = None

    def __post_init__(self):
        if self.trials and not np.all(self.ratios > 0):
            raise ValueError("Concentration ratios must be positive")

    @property
    def minimum(self) -> float:
        return float(self.ratios.min())

    @property
    def median(self) -> float:
        return float(np.median(self.ratios))

    @property
    def maximum(self) -> float:
        return float(self.ratios.max())

    @property
    def spread(self) -> float:
        return self.maximum - self.minimum

    @property
    def bracket(self) -> tuple:
        """Empirical [c1_hat, c2_hat]."""
        return (self.minimum, self.maximum)

    def to_dict(self) -> Dict[str, object]:
        return {
            "P": self.num_projections,
            "trials": self.trials,
            "skipped": self.skipped,
            "min": self.minimum,
            "median": self.median,
            "max": self.maximum,
            "spread": self.spread,
            "reference_scale": self.reference_scale,
        }


def rop_l1_ratio(matrix: np.ndarray, alphas: np.ndarray, betas: np.ndarray) -> float:
    """(1/P) ||A(J)||_1 / ||J||_F for sketches of shape (P, n)."""
    projections = np.einsum("pj,pj->p", alphas.conj(), betas @ matrix.T)
    return float(np.mean(np.abs(projections)) / np.linalg.norm(matrix))


def _draw_matrix(source: MatrixSource, rng: np.random.Generator, trial: int) -> np.ndarray:
    if callable(source):
        return np.asarray(source(rng))
    return np.asarray(source[trial % len(source)])


def measure_rop_concentration(
    matrix_source: MatrixSource,
    projection_counts: Sequence[int],
    trials: int,
    seed: int,
    distribution: SketchDistribution = SketchDistribution.PHASE,
) -> List[ConcentrationReport]:
    """
    Measure the ROP l1 ratio for several projection counts.

    Args:
        matrix_source: Test matrices, or a callable drawing one from a generator
        projection_counts: Values of P
        trials: Draws per P (fresh sketches, and fresh matrix when callable)
        seed: Master seed
        distribution: Sketch distribution

    Returns:
        One ConcentrationReport per P, in the given order
    """
    reports = []
    for p in projection_counts:
        ratios = []
        skipped = 0
        for t in range(trials):
            rng = make_rng(seed, "concentration", p, t)
            matrix = _draw_matrix(matrix_source, rng, t)
            if not np.any(matrix):
                skipped += 1
                continue
            n = matrix.shape[0]
            alphas = draw_sketches(rng, (p, n), distribution)
            betas = draw_sketches(rng, (p, n), distribution)
            ratios.append(rop_l1_ratio(matrix, alphas, betas))

        if skipped:
            logger.warning(f"P={p}: skipped {skipped} zero test matrices")
        if not ratios:
            raise ValueError(f"P={p}: no nonzero test matrices")
        reports.append(ConcentrationReport(p, len(ratios), np.array(ratios), skipped))

    return reports


def interferometric_matrix_source(
    plan: VisibilityPlan,
    sparsity: int,
    hollowed: bool = True,
) -> Callable[[np.random.Generator], np.ndarray]:
    """Random block-diagonal interferometric matrices of K-sparse skies."""

    def draw(rng: np.random.Generator) -> np.ndarray:
        sky = random_sparse_sky(plan.side, sparsity, int(rng.integers(2 ** 31)), fov=plan.fov)
        matrix = block_interferometric_matrix(sky, plan)
        return hollow(matrix) if hollowed else matrix

    return draw


@dataclass
class SpreadComparison:
    """Repeated comparison of the ratio spread at two projection counts."""
    small_projections: int
    large_projections: int
    repetitions: int
    shrunk: int
    small_spreads: List[float] = field(default_factory=list)
    large_spreads: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, object]:
        return {
            "small_P": self.small_projections,
            "large_P": self.large_projections,
            "repetitions": self.repetitions,
            "shrunk": self.shrunk,
            "median_small_spread": float(np.median(self.small_spreads)),
            "median_large_spread": float(np.median(self.large_spreads)),
        }


def compare_concentration_spread(
    matrix_source: MatrixSource,
    small_projections: int = 10,
    large_projections: int = 200,
    repetitions: int = 50,
    trials: int = 20,
    seed: int = 0,
) -> SpreadComparison:
    """Count repetitions where the spread at the larger P is strictly smaller."""
    comparison = SpreadComparison(small_projections, large_projections, repetitions, 0)
    for r in range(repetitions):
        small, large = measure_rop_concentration(
            matrix_source,
            [small_projections, large_projections],
            trials,
            seed=int(make_rng(seed, "spread", r).integers(2 ** 62)),
        )
        comparison.small_spreads.append(small.spread)
        comparison.large_spreads.append(large.spread)
        if large.spread < small.spread:
            comparison.shrunk += 1

    logger.info(
        f"Concentration spread shrank in {comparison.shrunk}/{repetitions} repetitions "
        f"(P={small_projections} -> {large_projections})"
    )
    return comparison
