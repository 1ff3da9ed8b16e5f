"""
Unit tests for the empirical verification layer.

Tests cover:
- Oracle equivalences of the imaging models
- l1 concentration of rank-one projections
- RIP measurements
- Property suites and fault injection
- Acquisition/imaging consistency
"""

import numpy as np
import pytest

from src.acquisition import SketchEnsemble
from src.analysis import (
    ConcentrationReport,
    compare_concentration_spread,
    fit_loglog_slope,
    interferometric_matrix_source,
    measure_acquisition_consistency,
    measure_rip_l2l1,
    measure_rip_l2l2,
    measure_rop_concentration,
    random_plan,
    run_adjoint_suite,
    run_validation,
    verify_model_equivalences,
)
from src.analysis.suites import ADJOINT_SUITE, check_frobenius_identity, check_nufft_accuracy
from src.errors import ResourceGuardError, ValidationSuiteError
from src.operators import SensingModel
from src.sky import random_sparse_sky


@pytest.fixture
def model():
    plan = random_plan(4, 3, 8, seed=2)
    return SensingModel(plan, SketchEnsemble.draw(4, 5, 3, 2, seed=3), backend="nudft")


class TestEquivalences:
    """Tests for the oracle comparisons."""

    @pytest.mark.parametrize("seed", range(10))
    def test_all_checks_pass(self, seed):
        report = verify_model_equivalences(4, 3, 8, 5, 2, seed=seed)

        assert report.passed, report.to_dict()
        assert report.max_deviation <= 1e-10
        assert {c.name for c in report.checks} >= {"mrop global rop", "frobenius identity", "dense oracle"}

    def test_size_guard(self):
        with pytest.raises(ResourceGuardError, match="exceeds"):
            verify_model_equivalences(27, 100, 100, 25, 12, seed=0)


class TestConcentration:
    """Tests for the ROP l1 ratio."""

    def test_single_entry_ratio_is_one(self):
        matrix = np.zeros((6, 6), dtype=np.complex128)
        matrix[0, 5] = 1.0

        (report,) = measure_rop_concentration([matrix], [40], trials=5, seed=0)

        np.testing.assert_allclose(report.ratios, 1.0, atol=1e-12)

    def test_zero_matrices_skipped(self):
        matrices = [np.zeros((3, 3)), np.eye(3)]

        (report,) = measure_rop_concentration(matrices, [10], trials=4, seed=1)

        assert report.skipped == 2
        assert report.trials == 2

    def test_only_zero_matrices(self):
        with pytest.raises(ValueError, match="no nonzero"):
            measure_rop_concentration([np.zeros((3, 3))], [10], trials=3, seed=0)

    def test_reports_in_order(self):
        reports = measure_rop_concentration([np.eye(4)], [5, 50], trials=3, seed=0)

        assert [r.num_projections for r in reports] == [5, 50]
        assert reports[0].to_dict()["trials"] == 3

    def test_spread_shrinks_with_projections(self):
        source = interferometric_matrix_source(random_plan(5, 3, 16, seed=4), 5)

        comparison = compare_concentration_spread(source, repetitions=5, trials=20, seed=7)

        assert comparison.shrunk == 5

    def test_positive_ratios_required(self):
        with pytest.raises(ValueError, match="positive"):
            ConcentrationReport(3, 2, np.array([0.0, 1.0]))


class TestRip:
    """Tests for the RIP measurements."""

    def test_l2l2_report(self):
        plan = random_plan(5, 3, 16, seed=1)

        report = measure_rip_l2l2(plan, sparsity=4, trials=30, seed=0)

        assert report.ratios.shape == (30,)
        assert np.all(report.ratios > 0)
        assert report.distortion == pytest.approx(np.max(np.abs(report.ratios - 1.0)))
        assert report.to_dict()["K0"] == 4

    def test_l2l2_single_pixel_is_exact(self):
        """Test that 1-sparse vectors have unit scaled energy (distortion at round-off level)."""
        plan = random_plan(5, 3, 16, seed=1)

        report = measure_rip_l2l2(plan, sparsity=1, trials=20, seed=0)

        assert report.distortion <= 1e-10

    def test_l2l2_sparsity_range(self):
        plan = random_plan(3, 2, 8, seed=1)

        with pytest.raises(ValueError, match="Sparsity"):
            measure_rip_l2l2(plan, sparsity=0, trials=3, seed=0)

    def test_l2l1_bracket(self, model):
        report = measure_rip_l2l1(model, sparsity=3, trials=20, seed=0)

        low, high = report.bracket
        assert 0 < low <= high
        assert report.reference_scale > 0


class TestSuites:
    """Tests for the validation suites."""

    def test_adjoint_suite_passes(self, model):
        reports = run_adjoint_suite(model, trials=5, seed=1)

        assert all(r.passed for r in reports)
        assert "MDGF" in {r.name for r in reports}

    def test_adjoint_suite_default_trials(self, model):
        reports = run_adjoint_suite(model, seed=2)

        assert {r.trials for r in reports} == {20}

    def test_fault_injection_detected(self, model):
        reports = run_adjoint_suite(model, trials=5, seed=1, inject_fault=True)

        failed = [r.name for r in reports if not r.passed]
        assert failed == ["MDGF[faulty]"]

    def test_nufft_accuracy(self):
        check = check_nufft_accuracy(sides=(16,), instances=3, seed=0)

        assert check.passed, check.to_dict()

    def test_frobenius_identity(self):
        assert check_frobenius_identity(skies=3, seed=2).passed

    def test_validation_raises_on_fault(self, model):
        report = run_validation(
            model, seed=0, equivalence_seeds=1, nufft_instances=1,
            concentration_repetitions=3, adjoint_trials=3, inject_adjoint_fault=True,
        )

        assert not report.passed
        with pytest.raises(ValidationSuiteError) as exc_info:
            report.raise_for_failures()
        assert exc_info.value.invariant == ADJOINT_SUITE

    def test_validation_passes(self, model):
        report = run_validation(
            model, seed=0, equivalence_seeds=2, nufft_instances=2,
            concentration_repetitions=3, adjoint_trials=3,
        )

        assert report.passed, report.to_dict()
        report.raise_for_failures()
        assert len(report.summary_lines()) == 5


class TestConsistency:
    """Tests for acquisition/imaging consistency."""

    def test_loglog_slope(self):
        x = np.array([1e2, 1e3, 1e4])

        assert fit_loglog_slope(x, x ** -0.5) == pytest.approx(-0.5)

    def test_loglog_needs_two_points(self):
        with pytest.raises(ValueError, match="two positive"):
            fit_loglog_slope([1.0, 2.0], [0.0, 1.0])

    def test_gap_decays_like_inverse_sqrt(self):
        plan = random_plan(3, 2, 8, seed=3)
        sky = random_sparse_sky(8, 3, seed=4, fov=plan.fov)
        sketches = SketchEnsemble.draw(3, 4, 2, 2, seed=5)

        report = measure_acquisition_consistency(sky, plan, sketches, [1_000, 10_000, 100_000], repetitions=4, seed=6)

        assert report.gaps[0] > report.gaps[-1]
        assert -0.75 <= report.slope <= -0.25
