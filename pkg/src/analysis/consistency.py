"""
Acquisition vs. imaging-model consistency.

Compressive measurements computed from I simulated samples approach the
noiseless MROP forward model as I grows; the relative gap is expected to
decay like I^(-1/2).
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.acquisition.sensing import compressive_acquire
from src.acquisition.signals import simulate_observation
from src.acquisition.sketches import SketchEnsemble
from src.analysis.equivalence import relative_error
from src.operators.fourier import VisibilityPlan
from src.operators.models import SensingModel
from src.seeding import derive_seed
from src.sky.model import SkyImage

logger = logging.getLogger(__name__)


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ValueError("Need at least two positive points for a log-log fit")
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


@dataclass
class ConsistencyReport:
    """Mean relative gap per sample count."""
    sample_counts: List[int]
    repetitions: int
    gaps: List[float] = field(default_factory=list)

    @property
    def slope(self) -> float:
        return fit_loglog_slope(self.sample_counts, self.gaps)

    def to_dict(self) -> Dict[str, object]:
        return {
            "sample_counts": self.sample_counts,
            "repetitions": self.repetitions,
            "gaps": self.gaps,
            "slope": self.slope if len(self.sample_counts) > 1 else None,
        }


def measure_acquisition_consistency(
    img: SkyImage,
    plan: VisibilityPlan,
    sketches: SketchEnsemble,
    sample_counts: Sequence[int],
    repetitions: int = 3,
    seed: int = 0,
    noise_cov: Optional[np.ndarray] = None,
    workers: int = 1,
) -> ConsistencyReport:
    """
    Relative gap between simulated compressive acquisition and the forward model.

    Args:
        img: Sky image
        plan: Visibility plan (grid-unit antenna positions)
        sketches: Sketches and modulations
        sample_counts: Values of I
        repetitions: Independent simulations per I
        seed: Master seed
        noise_cov: Receiver noise covariance (its bias is removed)
        workers: Threads for the per-batch simulation

    Returns:
        ConsistencyReport
    """
    reference = SensingModel(plan, sketches, backend="nudft").mrop().forward(img.values)
    report = ConsistencyReport(list(sample_counts), repetitions)

    for count in sample_counts:
        gaps = []
        for r in range(repetitions):
            batches = simulate_observation(
                img, plan, count, noise_cov, seed=derive_seed(seed, "consistency", count, r), workers=workers
            )
            z = compressive_acquire(batches, sketches, noise_cov, workers)
            gaps.append(relative_error(z, reference))
        report.gaps.append(float(np.mean(gaps)))
        logger.info(f"I={count}: mean relative gap {report.gaps[-1]:.4f}")

    return report
