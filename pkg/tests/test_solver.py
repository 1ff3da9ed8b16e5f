"""
Unit tests for sparse recovery.

Tests cover:
- SolverConfig validation
- Lipschitz estimation
- BPDN by lambda-continuation (feasibility, continuation order, edge cases)
- Brute-force support enumeration
"""

import json

import numpy as np
import pytest

from src.errors import ResourceGuardError, SolverDivergenceError
from src.operators import DFT2
from src.seeding import make_rng
from src.sky import snr_db
from src.solver import (
    SolverConfig,
    dense_operator,
    estimate_lipschitz,
    exhaustive_support_search,
    fista_lasso,
    solve_bpdn,
)


def sparse_problem(seed: int, rows: int = 20, cols: int = 64, sparsity: int = 2):
    rng = make_rng(seed, "solver-test")
    matrix = rng.standard_normal((rows, cols)) / np.sqrt(rows)
    truth = np.zeros(cols)
    truth[rng.choice(cols, sparsity, replace=False)] = rng.uniform(0.5, 1.5, sparsity)
    return matrix, truth


class TestSolverConfig:
    """Tests for SolverConfig validation."""

    def test_defaults(self):
        config = SolverConfig()

        assert config.epsilon == 1e-2
        assert config.nonneg is True

    def test_negative_epsilon(self):
        with pytest.raises(ValueError, match="epsilon"):
            SolverConfig(epsilon=-1.0)

    def test_zero_iterations(self):
        with pytest.raises(ValueError, match="max_inner"):
            SolverConfig(max_inner=0)


class TestLipschitz:
    """Tests for power iteration."""

    def test_diagonal_operator(self):
        op = dense_operator(np.diag([1.0, 2.0, 3.0]))

        assert estimate_lipschitz(op, power_iters=200) == pytest.approx(9.0, rel=1e-6)

    def test_zero_operator(self):
        assert estimate_lipschitz(dense_operator(np.zeros((3, 4)))) == 0.0

    def test_scaled_identity(self):
        assert estimate_lipschitz(dense_operator(3.0 * np.eye(5))) == pytest.approx(9.0, rel=1e-9)

    def test_unitary_dft(self):
        assert estimate_lipschitz(DFT2(8)) == pytest.approx(1.0, rel=1e-9)


class TestSolveBpdn:
    """Tests for solve_bpdn."""

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_recovers_sparse_vector(self, seed):
        """Test exact-support recovery of a 2-sparse vector from 20 Gaussian rows."""
        matrix, truth = sparse_problem(seed)
        z = matrix @ truth

        result = solve_bpdn(dense_operator(matrix), z, SolverConfig(epsilon=1e-4, max_outer=40))

        assert result.converged
        assert result.residual <= 1e-4
        np.testing.assert_allclose(result.estimate, truth, atol=1e-2)

    def test_matches_exhaustive_search(self):
        matrix, truth = sparse_problem(5)
        z = matrix @ truth

        result = solve_bpdn(dense_operator(matrix), z, SolverConfig(epsilon=1e-5, max_outer=40))
        oracle = exhaustive_support_search(matrix, z, 2)

        assert set(np.flatnonzero(result.estimate > 1e-3)) == set(np.flatnonzero(oracle))

    @pytest.mark.parametrize("seed", range(20))
    def test_snr_against_exhaustive_search(self, seed):
        """Test that BPDN at epsilon 1e-6 reaches 80 dB against the support-enumeration oracle."""
        rng = make_rng(0, "solver-oracle", seed)
        matrix = rng.standard_normal((20, 64)) / np.sqrt(20)
        truth = np.zeros(64)
        truth[rng.choice(64, 2, replace=False)] = 1.0
        z = matrix @ truth

        result = solve_bpdn(dense_operator(matrix), z, SolverConfig(epsilon=1e-6, max_outer=40, seed=seed))
        oracle = exhaustive_support_search(matrix, z, 2)

        assert snr_db(oracle, result.estimate) >= 80.0

    def test_continuation_decreases_lambda(self):
        matrix, truth = sparse_problem(3)

        result = solve_bpdn(dense_operator(matrix), matrix @ truth, SolverConfig(epsilon=1e-4, max_outer=40))
        lams = [step.lam for step in result.history if not step.refinement]

        assert all(b < a for a, b in zip(lams, lams[1:]))
        assert lams[0] == pytest.approx(0.9 * np.max(np.abs(matrix.T @ (matrix @ truth))))

    def test_nonnegative_estimate(self):
        matrix, truth = sparse_problem(4)
        noisy = matrix @ truth + 0.01 * np.random.default_rng(0).standard_normal(20)

        result = solve_bpdn(dense_operator(matrix), noisy, SolverConfig(epsilon=0.1))

        assert np.all(result.estimate >= 0)

    def test_zero_measurements(self):
        """Test that z = 0 returns the zero estimate immediately."""
        matrix, _ = sparse_problem(0)

        result = solve_bpdn(dense_operator(matrix), np.zeros(20), SolverConfig(epsilon=0.0))

        assert result.converged
        assert result.outer_iterations == 0
        assert not np.any(result.estimate)

    def test_not_converged(self):
        matrix, truth = sparse_problem(6)

        result = solve_bpdn(dense_operator(matrix), matrix @ truth, SolverConfig(epsilon=1e-12, max_outer=1))

        assert not result.converged
        assert result.residual > 1e-12
        assert result.outer_iterations == 1

    def test_operator_annihilating_measurements(self):
        result = solve_bpdn(dense_operator(np.zeros((3, 4))), np.ones(3))

        assert not result.converged
        assert not np.any(result.estimate)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="does not match"):
            solve_bpdn(dense_operator(np.eye(3)), np.ones(4))

    def test_diagnostics(self, tmp_path):
        matrix, truth = sparse_problem(7)
        result = solve_bpdn(dense_operator(matrix), matrix @ truth, SolverConfig(epsilon=1e-3))

        path = result.write_diagnostics(tmp_path / "diag" / "solver.jsonl")
        lines = path.read_text().strip().splitlines()

        assert len(lines) == len(result.history)
        assert "lam" in json.loads(lines[0])
        assert result.to_dict()["nonzeros"] == int(np.count_nonzero(result.estimate))


class TestFistaLasso:
    """Tests for the LASSO subproblem solver."""

    def test_lambda_must_be_positive(self):
        with pytest.raises(ValueError, match="lambda"):
            fista_lasso(dense_operator(np.eye(2)), np.ones(2), 0.0)

    def test_identity_soft_threshold(self):
        """Test that the identity operator gives soft thresholding."""
        z = np.array([3.0, -2.0, 0.5])
        config = SolverConfig(nonneg=False, rel_tol=1e-12)

        x = fista_lasso(dense_operator(np.eye(3)), z, 1.0, cfg=config)

        np.testing.assert_allclose(x, [2.0, -1.0, 0.0], atol=1e-8)

    def test_divergence_detected(self):
        matrix, truth = sparse_problem(8)

        with pytest.raises(SolverDivergenceError):
            fista_lasso(
                dense_operator(matrix), matrix @ truth, 1e-3,
                cfg=SolverConfig(nonneg=False), lipschitz=1e-6,
            )


class TestExhaustiveSearch:
    """Tests for the brute-force oracle."""

    def test_finds_truth(self):
        matrix, truth = sparse_problem(9, rows=10, cols=16)

        np.testing.assert_allclose(exhaustive_support_search(matrix, matrix @ truth, 2), truth, atol=1e-10)

    def test_resource_guard(self):
        with pytest.raises(ResourceGuardError, match="supports"):
            exhaustive_support_search(np.ones((4, 100)), np.ones(4), 5)

    def test_no_nonnegative_fit(self):
        matrix = np.eye(3)

        estimate = exhaustive_support_search(matrix, -np.ones(3), 1)

        assert not np.any(estimate)
