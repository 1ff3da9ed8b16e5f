"""
Property suites run by ``validate``.

Each suite returns a SuiteResult named after the property it checks; the
validation report fails on the first suite that does not hold.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.analysis.concentration import (
    compare_concentration_spread,
    interferometric_matrix_source,
    measure_rop_concentration,
)
from src.analysis.equivalence import (
    CheckResult,
    random_plan,
    relative_error,
    verify_model_equivalences,
)
from src.errors import ValidationSuiteError
from src.operators.base import AdjointReport, LinearOp, dot_test
from src.operators.fourier import NUDFT, NUFFT, KaiserBesselKernel
from src.operators.models import SensingModel, block_interferometric_matrix, hollow
from src.operators.postsensing import GaussianProjection, averaging_operator
from src.seeding import derive_seed, make_rng
from src.sky.model import random_sparse_sky

logger = logging.getLogger(__name__)

ADJOINT_SUITE = "adjoint consistency"
EQUIVALENCE_SUITE = "model equivalence"
NUFFT_SUITE = "nufft accuracy"
FROBENIUS_SUITE = "frobenius identity"
CONCENTRATION_SUITE = "rop concentration"

NUFFT_TOLERANCE = 1e-6
FAULT_FACTOR = 1.01
ADJOINT_TRIALS = 20


@dataclass
class SuiteResult:
    """Outcome of one property suite."""
    name: str
    passed: bool
    detail: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, object]:
        return {"name": self.name, "passed": self.passed, **self.detail}


@dataclass
class ValidationReport:
    """All suites of a validation run."""
    suites: List[SuiteResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(suite.passed for suite in self.suites)

    @property
    def failures(self) -> List[SuiteResult]:
        return [suite for suite in self.suites if not suite.passed]

    def raise_for_failures(self):
        """Raise ValidationSuiteError naming the first failing suite."""
        if self.failures:
            first = self.failures[0]
            others = len(self.failures) - 1
            detail = f"{others} more suite(s) failed" if others else ""
            raise ValidationSuiteError(first.name, detail)

    def summary_lines(self) -> List[str]:
        return [f"{'PASS' if s.passed else 'FAIL'}  {s.name}" for s in self.suites]

    def to_dict(self) -> Dict[str, object]:
        return {"passed": self.passed, "suites": [suite.to_dict() for suite in self.suites]}


def with_faulty_adjoint(op: LinearOp, factor: float = FAULT_FACTOR) -> LinearOp:
    """Copy of ``op`` whose adjoint is scaled by ``factor`` (fault injection)."""
    return LinearOp(
        op.shape,
        forward=op.forward,
        adjoint=lambda y: factor * op.adjoint(y),
        name=f"{op.name}[faulty]",
        real_domain=op.real_domain,
    )


def run_adjoint_suite(
    model: SensingModel,
    trials: int = ADJOINT_TRIALS,
    seed: int = 0,
    rtol: float = 1e-10,
    inject_fault: bool = False,
) -> List[AdjointReport]:
    """
    Dot-test every operator of a sensing model plus the post-sensing baselines.

    Args:
        model: Sensing model to test
        trials: Random pairs per operator
        seed: Master seed
        rtol: Relative tolerance
        inject_fault: Replace the MROP operator by one with a broken adjoint

    Returns:
        One AdjointReport per operator
    """
    plan = model.plan
    ops = model.operators()
    ops.append(GaussianProjection(plan.num_rows, model.sketches.num_projections, derive_seed(seed, "gaussian")))
    ops.append(averaging_operator(plan, freq_threshold=0.1 * plan.side, group_size=2))
    if inject_fault:
        ops = [with_faulty_adjoint(op) if op.name == "MDGF" else op for op in ops]

    reports = [dot_test(op, trials, derive_seed(seed, "dot", i), rtol) for i, op in enumerate(ops)]
    failed = [r.name for r in reports if not r.passed]
    if failed:
        logger.error(f"Adjoint test failed for: {', '.join(failed)}")
    else:
        logger.info(f"✓ Adjoint consistency holds for {len(reports)} operators")
    return reports


def check_nufft_accuracy(
    sides: Sequence[int] = (16, 32),
    instances: int = 50,
    seed: int = 0,
    num_antennas: int = 6,
    num_batches: int = 3,
    kernel: Optional[KaiserBesselKernel] = None,
    tolerance: float = NUFFT_TOLERANCE,
) -> CheckResult:
    """Worst relative error of the gridded path against the NUDFT oracle."""
    worst = 0.0
    for side in sides:
        for t in range(instances):
            plan = random_plan(num_antennas, num_batches, side, derive_seed(seed, "nufft", side, t))
            image = make_rng(seed, "nufft-image", side, t).random(plan.pixel_count)
            error = relative_error(NUFFT(plan, kernel).forward(image), NUDFT(plan).forward(image))
            worst = max(worst, error)

    logger.info(f"NUFFT vs NUDFT: worst relative error {worst:.3e} over {instances * len(sides)} instances")
    return CheckResult(NUFFT_SUITE, worst, tolerance)


def check_frobenius_identity(
    num_antennas: int = 5,
    num_batches: int = 3,
    side: int = 16,
    skies: int = 10,
    sparsity: int = 5,
    seed: int = 0,
    tolerance: float = 1e-10,
) -> CheckResult:
    """||hollow block interferometric matrix||_F = ||G0 F x||_2 on random sparse skies."""
    plan = random_plan(num_antennas, num_batches, side, derive_seed(seed, "frobenius"))
    visibility = NUDFT(plan)
    mask = plan.offdiagonal_mask

    worst = 0.0
    for t in range(skies):
        sky = random_sparse_sky(side, sparsity, derive_seed(seed, "frobenius-sky", t), fov=plan.fov)
        matrix_norm = np.linalg.norm(hollow(block_interferometric_matrix(sky, plan)))
        vis_norm = np.linalg.norm(visibility.forward(sky.values)[mask])
        worst = max(worst, relative_error(vis_norm, matrix_norm))

    return CheckResult(FROBENIUS_SUITE, worst, tolerance)


def check_single_entry_concentration(size: int = 8, projections: int = 50, seed: int = 0) -> CheckResult:
    """A matrix with one off-diagonal entry has ROP l1 ratio exactly 1."""
    matrix = np.zeros((size, size), dtype=np.complex128)
    matrix[0, size - 1] = 1.0
    (report,) = measure_rop_concentration([matrix], [projections], trials=5, seed=seed)
    return CheckResult("single entry ratio", float(np.max(np.abs(report.ratios - 1.0))), 1e-12)


def run_validation(
    model: SensingModel,
    seed: int = 0,
    equivalence_seeds: int = 10,
    nufft_instances: int = 50,
    concentration_repetitions: int = 50,
    adjoint_trials: int = ADJOINT_TRIALS,
    inject_adjoint_fault: bool = False,
) -> ValidationReport:
    """
    Run every property suite.

    Args:
        model: Desk-scale sensing model for the adjoint suite
        seed: Master seed
        equivalence_seeds: Random instances of the equivalence suite
        nufft_instances: Instances per grid side of the NUFFT accuracy suite
        concentration_repetitions: Repetitions of the spread comparison
        adjoint_trials: Random pairs per operator in the adjoint suite
        inject_adjoint_fault: Break one adjoint (fault injection)

    Returns:
        ValidationReport
    """
    report = ValidationReport()

    adjoint_reports = run_adjoint_suite(
        model, trials=adjoint_trials, seed=seed, inject_fault=inject_adjoint_fault
    )
    report.suites.append(SuiteResult(
        ADJOINT_SUITE,
        all(r.passed for r in adjoint_reports),
        {"operators": [r.to_dict() for r in adjoint_reports]},
    ))

    equivalences = [
        verify_model_equivalences(4, 3, 8, 5, 2, derive_seed(seed, "equivalence", s))
        for s in range(equivalence_seeds)
    ]
    report.suites.append(SuiteResult(
        EQUIVALENCE_SUITE,
        all(e.passed for e in equivalences),
        {
            "seeds": equivalence_seeds,
            "max_deviation": max((e.max_deviation for e in equivalences), default=0.0),
            "failures": [e.to_dict() for e in equivalences if not e.passed],
        },
    ))

    nufft_check = check_nufft_accuracy(instances=nufft_instances, seed=seed)
    report.suites.append(SuiteResult(NUFFT_SUITE, nufft_check.passed, nufft_check.to_dict()))

    frobenius = check_frobenius_identity(seed=seed)
    report.suites.append(SuiteResult(FROBENIUS_SUITE, frobenius.passed, frobenius.to_dict()))

    single = check_single_entry_concentration(seed=seed)
    source = interferometric_matrix_source(random_plan(5, 3, 16, derive_seed(seed, "concentration")), 5)
    spread = compare_concentration_spread(
        source, repetitions=concentration_repetitions, seed=derive_seed(seed, "spread")
    )
    required = int(np.ceil(0.9 * concentration_repetitions))
    report.suites.append(SuiteResult(
        CONCENTRATION_SUITE,
        single.passed and spread.shrunk >= required,
        {"single_entry": single.to_dict(), "spread": spread.to_dict(), "required": required},
    ))

    for line in report.summary_lines():
        logger.info(line)
    return report
