"""
Acquisition simulation: antenna signals, sample covariances, classical and
compressive sensing.
"""

from .sketches import (
    SketchDistribution,
    SketchEnsemble,
    rademacher,
    structured_sketch_ratio,
)
from .signals import (
    DEFAULT_SAMPLE_BUDGET,
    SignalBatch,
    SampleCovariance,
    noise_covariance,
    simulate_antenna_signals,
    simulate_batch,
    simulate_observation,
    sample_covariance,
)
from .sensing import (
    MeasurementCovarianceReport,
    exact_covariances,
    classical_acquire,
    batch_rops,
    compressive_acquire,
    rop_of_covariances,
    estimate_dc,
    size_accounting,
    empirical_measurement_covariance,
)

__all__ = [
    "SketchDistribution",
    "SketchEnsemble",
    "rademacher",
    "structured_sketch_ratio",
    "DEFAULT_SAMPLE_BUDGET",
    "SignalBatch",
    "SampleCovariance",
    "noise_covariance",
    "simulate_antenna_signals",
    "simulate_batch",
    "simulate_observation",
    "sample_covariance",
    "MeasurementCovarianceReport",
    "exact_covariances",
    "classical_acquire",
    "batch_rops",
    "compressive_acquire",
    "rop_of_covariances",
    "estimate_dc",
    "size_accounting",
    "empirical_measurement_covariance",
]
