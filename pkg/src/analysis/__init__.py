"""
Empirical verification: RIP measurements, ROP concentration, oracle
equivalences, validation suites and phase-transition sweeps.
"""

from .concentration import (
    ConcentrationReport,
    SpreadComparison,
    measure_rop_concentration,
    compare_concentration_spread,
    interferometric_matrix_source,
)
from .rip import RipReport, measure_rip_l2l2, measure_rip_l2l1
from .equivalence import (
    CheckResult,
    EquivalenceReport,
    random_plan,
    verify_model_equivalences,
)
from .suites import (
    SuiteResult,
    ValidationReport,
    run_adjoint_suite,
    check_nufft_accuracy,
    check_frobenius_identity,
    run_validation,
)
from .consistency import ConsistencyReport, measure_acquisition_consistency, fit_loglog_slope
from .phase import (
    TrialSetup,
    TrialRecord,
    PhaseDiagram,
    FrontierPoint,
    run_trial,
    phase_transition_sweep,
    compression_factor,
    transition_frontier,
    frontier_slope,
    monotonicity_violations,
)

__all__ = [
    "ConcentrationReport",
    "SpreadComparison",
    "measure_rop_concentration",
    "compare_concentration_spread",
    "interferometric_matrix_source",
    "RipReport",
    "measure_rip_l2l2",
    "measure_rip_l2l1",
    "CheckResult",
    "EquivalenceReport",
    "random_plan",
    "verify_model_equivalences",
    "SuiteResult",
    "ValidationReport",
    "run_adjoint_suite",
    "check_nufft_accuracy",
    "check_frobenius_identity",
    "run_validation",
    "ConsistencyReport",
    "measure_acquisition_consistency",
    "fit_loglog_slope",
    "TrialSetup",
    "TrialRecord",
    "PhaseDiagram",
    "FrontierPoint",
    "run_trial",
    "phase_transition_sweep",
    "compression_factor",
    "transition_frontier",
    "frontier_slope",
    "monotonicity_violations",
]
