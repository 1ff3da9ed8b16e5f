"""
Oracle equivalence checks for the imaging models.

The total interferometric matrix is block diagonal, diag(I_1, ..., I_B).
Aggregated per-batch ROPs are global ROPs of that matrix with structured
sketches:

    IROP:  a_p = (alpha_p1, ..., alpha_pB),  b_p = (beta_p1, ..., beta_pB)
    MROP:  a_mp = (eps_bm alpha_pb)_b,       b_mp = (eps'_bm beta_pb)_b

with Gamma = eps * eps' entrywise. Every check compares a fast operator path
with the explicit matrix construction.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np

from src.acquisition.sketches import SketchEnsemble, rademacher
from src.errors import ResourceGuardError
from src.geometry.layout import make_random_layout
from src.geometry.synthesis import synthesize_batches
from src.operators.base import chain
from src.operators.fourier import VisibilityPlan
from src.operators.models import (
    SensingModel,
    batch_interferometric_matrix,
    block_interferometric_matrix,
    hollow,
)
from src.seeding import derive_seed, make_rng
from src.sky.model import random_sparse_sky

logger = logging.getLogger(__name__)

EQUIVALENCE_TOLERANCE = 1e-10
EQUIVALENCE_SIZE_LIMIT = 10 ** 7
DENSE_ORACLE_LIMIT = 10 ** 6
RANDOM_ARRAY_RADIUS = 1000.0


@dataclass
class CheckResult:
    """One named comparison."""
    name: str
    max_deviation: float
    tolerance: float = EQUIVALENCE_TOLERANCE

    @property
    def passed(self) -> bool:
        return bool(self.max_deviation <= self.tolerance)

    def to_dict(self) -> Dict[str, object]:
        return {
            "name": self.name,
            "max_deviation": self.max_deviation,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


@dataclass
class EquivalenceReport:
    """Checks of one equivalence run."""
    seed: int
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    @property
    def failures(self) -> List[CheckResult]:
        return [check for check in self.checks if not check.passed]

    @property
    def max_deviation(self) -> float:
        return max((check.max_deviation for check in self.checks), default=0.0)

    def to_dict(self) -> Dict[str, object]:
        return {
            "seed": self.seed,
            "passed": self.passed,
            "checks": [check.to_dict() for check in self.checks],
        }


def relative_error(value: np.ndarray, reference: np.ndarray) -> float:
    """||value - reference|| / ||reference|| (absolute when the reference is 0)."""
    diff = float(np.linalg.norm(np.asarray(value) - np.asarray(reference)))
    scale = float(np.linalg.norm(reference))
    return diff / scale if scale > 0 else diff


def random_plan(num_antennas: int, num_batches: int, side: int, seed: int) -> VisibilityPlan:
    """Visibility plan of a seeded random planar array."""
    layout = make_random_layout(
        num_antennas, RANDOM_ARRAY_RADIUS, derive_seed(seed, "layout"), num_batches=num_batches
    )
    return VisibilityPlan.from_batches(synthesize_batches(layout), side)


def global_rop(matrix: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """a_r^* J b_r for global sketches of shape (R, QB)."""
    return np.einsum("rj,rj->r", left.conj(), right @ matrix.T)


def stacked_sketches(sketches: SketchEnsemble, left_signs: np.ndarray, right_signs: np.ndarray):
    """
    Global MROP sketches, ordered m * P + p.

    Args:
        sketches: Per-batch sketches (B, P, Q)
        left_signs: (B, M) signs eps
        right_signs: (B, M) signs eps'

    Returns:
        (left, right), each (M * P, Q * B)
    """
    b, p, q = sketches.alphas.shape
    m = left_signs.shape[1]
    # [m, p, b, q] -> rows (m, p), columns (b, q)
    left = np.einsum("bm,bpq->mpbq", left_signs, sketches.alphas).reshape(m * p, b * q)
    right = np.einsum("bm,bpq->mpbq", right_signs, sketches.betas).reshape(m * p, b * q)
    return left, right


def _dense_oracle_check(model: SensingModel, x: np.ndarray) -> CheckResult:
    # Explicit matrix product of the building blocks against the fast path
    dense = model.modulation.to_dense() @ model.rop.to_dense() @ model.visibility.to_dense()
    return CheckResult("dense oracle", relative_error(model.mrop().forward(x), dense @ x))


def verify_model_equivalences(
    num_antennas: int,
    num_batches: int,
    side: int,
    num_projections: int,
    num_modulations: int,
    seed: int,
    sparsity: int = 3,
    tolerance: float = EQUIVALENCE_TOLERANCE,
) -> EquivalenceReport:
    """
    Run every oracle comparison on one random instance (NUDFT backend).

    Checks:
        - per-batch interferometric matrices against NUDFT visibilities
        - IROP path against plain global ROP of the block matrix
        - centered IROP path against global ROP of the hollowed block matrix
        - MROP path against signed global ROP
        - ||hollow block matrix||_F against ||G0 F x||_2
        - MROP with Gamma = 1 against the IROP path
        - dense operator product against MROP (small instances)

    Args:
        num_antennas: Q
        num_batches: B
        side: N1
        num_projections: P
        num_modulations: M
        seed: Master seed of the instance
        sparsity: Sky sparsity
        tolerance: Relative tolerance of every check

    Returns:
        EquivalenceReport

    Raises:
        ResourceGuardError: If the instance exceeds desk scale
    """
    q, b, p, m = num_antennas, num_batches, num_projections, num_modulations
    size = q * b * side * side * p * m
    if size > EQUIVALENCE_SIZE_LIMIT:
        raise ResourceGuardError(
            f"Equivalence instance Q*B*N*P*M = {size} exceeds {EQUIVALENCE_SIZE_LIMIT}"
        )

    plan = random_plan(q, b, side, seed)
    sky = random_sparse_sky(side, min(sparsity, side * side), derive_seed(seed, "sky"), fov=plan.fov)
    x = sky.values

    sketches = SketchEnsemble.draw(q, p, b, m, derive_seed(seed, "sketch"))
    left_signs = rademacher(make_rng(seed, "eps"), (b, m))
    right_signs = rademacher(make_rng(seed, "eps-prime"), (b, m))
    sketches = sketches.with_modulations(left_signs * right_signs)

    model = SensingModel(plan, sketches, backend="nudft")
    irop_model = SensingModel(plan, sketches.integrated(), visibility=model.visibility)

    report = EquivalenceReport(seed)
    checks = report.checks

    visibilities = model.visibility.forward(x)
    block_errors = [
        relative_error(
            batch_interferometric_matrix(sky, plan, batch).ravel(),
            visibilities[plan.batch_slice(batch)],
        )
        for batch in range(b)
    ]
    checks.append(CheckResult("interferometric matrix", max(block_errors), tolerance))

    total = block_interferometric_matrix(sky, plan)
    ones = np.ones((b, 1))
    plain_left, plain_right = stacked_sketches(sketches, ones, ones)
    checks.append(CheckResult(
        "irop global rop",
        relative_error(irop_model.irop().forward(x), global_rop(total, plain_left, plain_right)),
        tolerance,
    ))
    checks.append(CheckResult(
        "centered irop global rop",
        relative_error(
            irop_model.irop_centered().forward(x),
            global_rop(hollow(total), plain_left, plain_right),
        ),
        tolerance,
    ))

    signed_left, signed_right = stacked_sketches(sketches, left_signs, right_signs)
    checks.append(CheckResult(
        "mrop global rop",
        relative_error(model.mrop().forward(x), global_rop(total, signed_left, signed_right)),
        tolerance,
    ))

    hollow_norm = np.linalg.norm(hollow(total))
    g0 = chain(model.selector, model.visibility)
    checks.append(CheckResult(
        "frobenius identity",
        relative_error(np.linalg.norm(g0.forward(x)), hollow_norm),
        tolerance,
    ))

    checks.append(CheckResult(
        "unit modulation",
        relative_error(irop_model.mrop().forward(x), irop_model.irop().forward(x)),
        tolerance,
    ))

    if plan.num_rows * side * side <= DENSE_ORACLE_LIMIT:
        check = _dense_oracle_check(model, x)
        check.tolerance = tolerance
        checks.append(check)

    for failure in report.failures:
        logger.error(f"seed {seed}: {failure.name} deviates by {failure.max_deviation:.3e}")
    return report
