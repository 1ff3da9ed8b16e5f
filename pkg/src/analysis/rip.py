"""
Empirical restricted-isometry measurements.

l2/l2: scaled squared norms N / (varpi^2 V) ||G0 F v||^2 of random unit
K0-sparse vectors; the distortion is the largest deviation from 1.
l2/l1: (1/P) ||R G0 F v||_1 over the same vectors, bracketed empirically.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from src.analysis.concentration import ConcentrationReport
from src.operators.base import LinearOp, chain, real_input
from src.operators.fourier import VisibilityPlan, make_visibility_operator
from src.operators.models import SensingModel
from src.operators.rop import OffDiagonalSelector
from src.seeding import make_rng

logger = logging.getLogger(__name__)


@dataclass
class RipReport:
    """l2/l2 distortion measurement."""
    sparsity: int
    trials: int
    distortion: float
    scaling: float
    ratios: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        if self.distortion < 0:
            raise ValueError("Distortion must be nonnegative")

    def to_dict(self) -> Dict[str, object]:
        return {
            "K0": self.sparsity,
            "trials": self.trials,
            "distortion": self.distortion,
            "scaling": self.scaling,
            "min_ratio": float(self.ratios.min()),
            "max_ratio": float(self.ratios.max()),
            "median_ratio": float(np.median(self.ratios)),
        }


def random_sparse_unit(rng: np.random.Generator, n: int, sparsity: int) -> np.ndarray:
    """Unit-norm K0-sparse vector with Rademacher signs on a uniform support."""
    v = np.zeros(n)
    support = rng.choice(n, size=sparsity, replace=False)
    v[support] = np.where(rng.random(sparsity) < 0.5, -1.0, 1.0) / np.sqrt(sparsity)
    return v


def measure_rip_l2l2(
    plan: VisibilityPlan,
    sparsity: int,
    trials: int,
    seed: int,
    backend: str = "nudft",
    visibility: Optional[LinearOp] = None,
) -> RipReport:
    """
    Measure the l2/l2 distortion of G0 F on random K0-sparse vectors.

    Args:
        plan: Visibility plan (fixes N1, Delta and the baselines)
        sparsity: K0
        trials: Number of random vectors
        seed: Master seed
        backend: Visibility backend when ``visibility`` is not given
        visibility: Prebuilt image -> visibility operator for the plan

    Returns:
        RipReport
    """
    v_count = plan.num_offdiagonal
    if v_count == 0:
        raise ValueError("The plan has no off-diagonal visibilities")
    n = plan.pixel_count
    if not 1 <= sparsity <= n:
        raise ValueError(f"Sparsity must lie in [1, {n}], got {sparsity}")

    visibility = visibility or make_visibility_operator(plan, backend)
    op = real_input(chain(OffDiagonalSelector(plan.num_antennas, plan.num_batches), visibility))
    scaling = n / (plan.varpi ** 2 * v_count)

    ratios = np.empty(trials)
    for t in range(trials):
        v = random_sparse_unit(make_rng(seed, "rip-l2l2", t), n, sparsity)
        ratios[t] = scaling * np.linalg.norm(op.forward(v)) ** 2

    distortion = float(np.max(np.abs(ratios - 1.0)))
    logger.info(f"RIP l2/l2: K0={sparsity}, {trials} trials, distortion {distortion:.4f}")
    return RipReport(sparsity, trials, distortion, scaling, ratios)


def measure_rip_l2l1(
    model: SensingModel,
    sparsity: int,
    trials: int,
    seed: int,
) -> ConcentrationReport:
    """
    Bracket (1/P) ||R G0 F v||_1 over random unit K0-sparse vectors.

    The reference scale varpi sqrt(V / 2N) is attached to the report.
    """
    plan = model.plan
    n = plan.pixel_count
    p = model.sketches.num_projections
    op = model.irop_centered()

    ratios = np.empty(trials)
    for t in range(trials):
        v = random_sparse_unit(make_rng(seed, "rip-l2l1", t), n, sparsity)
        ratios[t] = np.sum(np.abs(op.forward(v))) / p

    reference = plan.varpi * np.sqrt(plan.num_offdiagonal / (2.0 * n))
    report = ConcentrationReport(p, trials, ratios, reference_scale=float(reference))
    logger.info(
        f"RIP l2/l1 bracket: [{report.minimum:.4g}, {report.maximum:.4g}] "
        f"(reference scale {reference:.4g})"
    )
    return report
