"""
Unit tests for the operator algebra.

Tests the LinearOp combinators, the DFT, visibility plans, NUDFT/NUFFT,
ROP and modulation blocks, sensing models and post-sensing baselines.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from src.acquisition.sketches import SketchEnsemble
from src.analysis.equivalence import random_plan, relative_error
from src.errors import ConfigurationError, DimensionMismatchError
from src.geometry import make_random_layout, synthesize_batches
from src.operators import (
    DFT2,
    NUDFT,
    NUFFT,
    BlockROP,
    GaussianProjection,
    KaiserBesselKernel,
    LinearOp,
    Modulation,
    OffDiagonalSelector,
    SensingModel,
    VisibilityPlan,
    add_visibility_noise,
    adjoint_of,
    batch_interferometric_matrix,
    averaging_matrix,
    averaging_operator,
    baseline_dependent_averaging,
    center_measurements,
    chain,
    dft2,
    dirty_map,
    dot_test,
    forward_irop_centered,
    forward_mrop,
    gaussian_postsensing,
    hollow,
    interferometric_matrix,
    make_visibility_operator,
    modulation_op,
    nudft,
    real_input,
    rop_block,
    rop_block_adjoint,
    scaled,
    vstack,
)
from src.sky import SkyImage, dc_component, random_sparse_sky

# Integer antenna positions: every frequency lies on the image grid
ON_GRID_POSITIONS = np.array([
    [[0, 0], [1, 0], [0, 2], [3, 1]],
    [[0, 0], [0, 1], [2, 0], [1, 3]],
], dtype=float)


@pytest.fixture
def on_grid_plan():
    return VisibilityPlan(side=16, positions=ON_GRID_POSITIONS)


@pytest.fixture
def small_plan():
    return random_plan(4, 3, 8, seed=11)


def matrix_op(matrix: np.ndarray, real_domain: bool = False) -> LinearOp:
    return LinearOp(
        matrix.shape,
        forward=lambda x: matrix @ x,
        adjoint=lambda y: matrix.conj().T @ y,
        real_domain=real_domain,
    )


class TestLinearOpAlgebra:
    """Tests for composition, stacking and the dot test."""

    def setup_method(self):
        rng = np.random.default_rng(0)
        self.a = rng.standard_normal((5, 4)) + 1j * rng.standard_normal((5, 4))
        self.b = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))

    def test_chain_applies_rightmost_first(self):
        op = chain(matrix_op(self.a), matrix_op(self.b))
        x = np.arange(3.0)

        np.testing.assert_allclose(op.forward(x), self.a @ self.b @ x)
        assert op.shape == (5, 3)

    def test_chain_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            chain(matrix_op(self.b), matrix_op(self.a))

    def test_forward_checks_length(self):
        with pytest.raises(DimensionMismatchError, match="expected input of length 4"):
            matrix_op(self.a).forward(np.ones(3))

    def test_vstack_adjoint_sums_parts(self):
        op = vstack([matrix_op(self.a), matrix_op(2 * self.a)])
        y = np.ones(10, dtype=complex)

        np.testing.assert_allclose(op.adjoint(y), 3 * self.a.conj().T @ np.ones(5))

    def test_vstack_threads_match_serial(self):
        ops = [matrix_op(self.a), matrix_op(2 * self.a), matrix_op(-self.a)]
        rng = np.random.default_rng(3)
        x = rng.standard_normal(4)
        y = rng.standard_normal(15) + 1j * rng.standard_normal(15)

        serial, threaded = vstack(ops), vstack(ops, workers=3)

        np.testing.assert_array_equal(threaded.forward(x), serial.forward(x))
        np.testing.assert_array_equal(threaded.adjoint(y), serial.adjoint(y))

    def test_scaled_and_adjoint_of(self):
        op = scaled(matrix_op(self.a), 2.5)
        x = np.ones(4)

        np.testing.assert_allclose(op.forward(x), 2.5 * self.a @ x)
        np.testing.assert_allclose(adjoint_of(matrix_op(self.a)).forward(np.ones(5)), self.a.conj().T @ np.ones(5))

    def test_real_input_adjoint_is_real(self):
        op = real_input(matrix_op(self.a))

        out = op.adjoint(np.ones(5, dtype=complex))

        assert not np.iscomplexobj(out)
        np.testing.assert_allclose(out, np.real(self.a.conj().T @ np.ones(5)))

    def test_matmul(self):
        op = matrix_op(self.a) @ matrix_op(self.b)

        assert op.shape == (5, 3)
        np.testing.assert_allclose(matrix_op(self.a) @ np.ones(4), self.a @ np.ones(4))

    def test_to_dense(self):
        np.testing.assert_allclose(matrix_op(self.a).to_dense(), self.a)

    def test_dot_test_passes_for_consistent_pair(self):
        report = dot_test(chain(matrix_op(self.a), matrix_op(self.b)), trials=10)

        assert report.passed
        assert report.to_dict()["trials"] == 10

    def test_dot_test_catches_wrong_adjoint(self):
        broken = LinearOp(
            self.a.shape,
            forward=lambda x: self.a @ x,
            adjoint=lambda y: 1.01 * self.a.conj().T @ y,
            name="broken",
        )

        report = dot_test(broken, trials=5)

        assert not report.passed
        assert report.max_error > 1e-4


class TestDft:
    """Tests for the centered unitary DFT."""

    @given(st.sampled_from([2, 4, 6, 8, 16]), st.integers(min_value=0, max_value=1000))
    @settings(max_examples=20, deadline=None)
    def test_unitary(self, side, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(side * side) + 1j * rng.standard_normal(side * side)
        dft = DFT2(side)

        assert np.linalg.norm(dft.forward(x)) == pytest.approx(np.linalg.norm(x), rel=1e-12)
        np.testing.assert_allclose(dft.adjoint(dft.forward(x)), x, atol=1e-12)

    def test_dc_at_center(self):
        img = random_sparse_sky(8, 5, seed=2)
        spectrum = dft2(img.values)

        assert spectrum[4 * 8 + 4] == pytest.approx(dc_component(img))

    def test_non_square_rejected(self):
        with pytest.raises(DimensionMismatchError, match="square"):
            dft2(np.ones(10))


class TestVisibilityPlan:
    """Tests for plan construction and row ordering."""

    def test_row_ordering(self, on_grid_plan):
        """Test that row b*Q^2 + j*Q + k samples chi_k - chi_j."""
        chi = on_grid_plan.frequencies
        p = ON_GRID_POSITIONS

        np.testing.assert_array_equal(chi[1 * 16 + 2 * 4 + 3], p[1, 3] - p[1, 2])
        np.testing.assert_array_equal(chi[0 * 16 + 3 * 4 + 0], p[0, 0] - p[0, 3])

    def test_counts(self, on_grid_plan):
        assert on_grid_plan.num_rows == 32
        assert on_grid_plan.num_offdiagonal == 24
        assert on_grid_plan.offdiagonal_mask.sum() == 24
        assert np.all(on_grid_plan.frequencies[~on_grid_plan.offdiagonal_mask] == 0)

    def test_without_dc_rows(self, on_grid_plan):
        """Test that dropping diagonal rows leaves exactly the V off-diagonal frequencies."""
        hollow_plan = VisibilityPlan(side=16, positions=ON_GRID_POSITIONS, include_dc_rows=False)

        assert hollow_plan.num_rows == 24
        assert hollow_plan.rows_per_batch == 12
        assert hollow_plan.offdiagonal_mask.all()
        np.testing.assert_array_equal(
            hollow_plan.frequencies, on_grid_plan.frequencies[on_grid_plan.offdiagonal_mask]
        )
        assert NUDFT(hollow_plan).shape == (24, 256)
        assert NUFFT(hollow_plan).shape == (24, 256)
        assert hollow_plan.batch_slice(1) == slice(12, 24)

    def test_without_dc_rows_matches_selected_rows(self, on_grid_plan):
        hollow_plan = VisibilityPlan(side=16, positions=ON_GRID_POSITIONS, include_dc_rows=False)
        x = np.random.default_rng(0).standard_normal(256)

        full = NUDFT(on_grid_plan).forward(x)

        np.testing.assert_allclose(NUDFT(hollow_plan).forward(x), full[on_grid_plan.offdiagonal_mask], atol=1e-12)

    def test_sensing_model_needs_dc_rows(self):
        hollow_plan = VisibilityPlan(side=16, positions=ON_GRID_POSITIONS, include_dc_rows=False)

        with pytest.raises(ConfigurationError, match="include_dc_rows"):
            SensingModel(hollow_plan, SketchEnsemble.draw(4, 3, 2, 1, seed=0), backend="nudft")

    def test_from_batches_fills_band(self):
        layout = make_random_layout(5, 250.0, seed=4, num_batches=3)
        plan = VisibilityPlan.from_batches(synthesize_batches(layout), 32, fill=0.4)
        longest = np.linalg.norm(plan.frequencies, axis=1).max()

        assert longest == pytest.approx(0.4 * 16)
        assert plan.scale > 0

    def test_out_of_band_rejected(self):
        positions = np.array([[[0.0, 0.0], [8.0, 0.0]]])

        with pytest.raises(ConfigurationError, match="in-band"):
            VisibilityPlan(side=16, positions=positions)

    def test_invalid_fill(self):
        batches = synthesize_batches(make_random_layout(3, 10.0, seed=0, num_batches=1))

        with pytest.raises(ConfigurationError, match="fill"):
            VisibilityPlan.from_batches(batches, 16, fill=1.5)

    def test_subset_and_metadata(self, small_plan):
        subset = small_plan.subset([0, 2])

        assert subset.num_batches == 2
        np.testing.assert_array_equal(subset.positions[1], small_plan.positions[2])
        assert small_plan.metadata()["num_antennas"] == 4


class TestVisibilityOperators:
    """Tests for the exact and gridded visibility operators."""

    def test_nudft_on_grid_matches_dft(self, on_grid_plan):
        """Test that integer frequencies sample the scaled unitary DFT."""
        img = random_sparse_sky(16, 6, seed=5)
        spectrum = dft2(img.values)
        chi = on_grid_plan.frequencies.astype(int)
        index = (chi[:, 0] + 8) * 16 + (chi[:, 1] + 8)
        scale = on_grid_plan.pixel_size ** 2 * 16

        np.testing.assert_allclose(nudft(on_grid_plan, img.values), scale * spectrum[index], atol=1e-12)

    def test_interferometric_matrix_matches_nudft(self, small_plan):
        img = random_sparse_sky(8, 4, seed=1, fov=small_plan.fov)
        v = NUDFT(small_plan).forward(img.values)

        for b in range(small_plan.num_batches):
            matrix = batch_interferometric_matrix(img, small_plan, b)
            assert relative_error(matrix.ravel(), v[small_plan.batch_slice(b)]) <= 1e-12
            np.testing.assert_allclose(matrix, matrix.conj().T)

    @pytest.mark.parametrize("side", [16, 32])
    def test_nufft_accuracy(self, side):
        for seed in range(3):
            plan = random_plan(6, 3, side, seed)
            image = np.random.default_rng(seed).random(plan.pixel_count)

            assert relative_error(NUFFT(plan).forward(image), NUDFT(plan).forward(image)) <= 1e-6

    @pytest.mark.parametrize("backend", ["nudft", "nufft"])
    def test_adjoint(self, small_plan, backend):
        assert dot_test(make_visibility_operator(small_plan, backend), trials=10, seed=3).passed

    def test_unknown_backend(self, small_plan):
        with pytest.raises(ConfigurationError, match="backend"):
            make_visibility_operator(small_plan, "fft")

    @pytest.mark.parametrize("backend", ["nudft", "nufft"])
    def test_per_batch_threads_match_single_operator(self, small_plan, backend):
        rng = np.random.default_rng(4)
        image = rng.random(small_plan.pixel_count)
        y = rng.standard_normal(small_plan.num_rows) + 1j * rng.standard_normal(small_plan.num_rows)
        single = make_visibility_operator(small_plan, backend)

        threaded = make_visibility_operator(small_plan, backend, workers=3)

        assert threaded.shape == single.shape
        assert relative_error(threaded.forward(image), single.forward(image)) <= 1e-12
        assert relative_error(threaded.adjoint(y), single.adjoint(y)) <= 1e-12
        assert dot_test(threaded, trials=5, seed=2).passed

    def test_thread_count_does_not_change_results(self, small_plan):
        y = np.random.default_rng(5).standard_normal(small_plan.num_rows) + 0j

        two = make_visibility_operator(small_plan, "nufft", workers=2).adjoint(y)
        three = make_visibility_operator(small_plan, "nufft", workers=3).adjoint(y)

        np.testing.assert_array_equal(two, three)

    def test_default_kernel_beta(self):
        kernel = KaiserBesselKernel()

        assert kernel.beta == pytest.approx(np.pi * 7 * 0.75 * 0.98)
        assert kernel.evaluate(np.array([4.0]))[0] == 0.0

    def test_kernel_width_validated(self):
        with pytest.raises(ValueError, match="width"):
            KaiserBesselKernel(width=1)

    def test_dirty_map_is_real(self, small_plan):
        op = NUDFT(small_plan)
        v = op.forward(random_sparse_sky(8, 2, seed=0).values)

        assert not np.iscomplexobj(dirty_map(op, v))


class TestRop:
    """Tests for ROP blocks and modulations."""

    def setup_method(self):
        self.sketches = SketchEnsemble.draw(4, 6, 2, 3, seed=8)
        rng = np.random.default_rng(1)
        self.v = rng.standard_normal(2 * 16) + 1j * rng.standard_normal(2 * 16)

    def test_rop_block_matches_dense_reference(self):
        alphas, betas = self.sketches.alphas[0], self.sketches.betas[0]
        v_b = self.v[:16]
        dense = np.array([
            np.outer(alphas[p], betas[p].conj()).conj().ravel() for p in range(6)
        ])

        np.testing.assert_allclose(rop_block(alphas, betas, v_b), dense @ v_b, atol=1e-12)

    def test_rop_block_is_bilinear_form(self):
        alphas, betas = self.sketches.alphas[1], self.sketches.betas[1]
        matrix = self.v[16:].reshape(4, 4)
        expected = [alphas[p].conj() @ matrix @ betas[p] for p in range(6)]

        np.testing.assert_allclose(rop_block(alphas, betas, self.v[16:]), expected, atol=1e-12)

    def test_threaded_block_rop_matches_serial(self):
        serial = BlockROP(self.sketches)
        threaded = BlockROP(self.sketches, workers=2)
        y = np.arange(12.0) + 1j

        np.testing.assert_allclose(threaded.forward(self.v), serial.forward(self.v), rtol=1e-13)
        np.testing.assert_allclose(threaded.adjoint(y), serial.adjoint(y), rtol=1e-13)

    def test_block_rop_concatenates_batches(self):
        rop = BlockROP(self.sketches)
        y = rop.forward(self.v)

        for b in range(2):
            expected = rop_block(self.sketches.alphas[b], self.sketches.betas[b], self.v[16 * b:16 * (b + 1)])
            np.testing.assert_allclose(y[6 * b:6 * (b + 1)], expected, atol=1e-12)
            np.testing.assert_allclose(rop.dense_rows(b) @ self.v[16 * b:16 * (b + 1)], expected, atol=1e-12)

    def test_block_rop_adjoint(self):
        rop = BlockROP(self.sketches)
        y = np.arange(12.0) + 1j

        out = rop.adjoint(y)

        np.testing.assert_allclose(
            out[:16], rop_block_adjoint(self.sketches.alphas[0], self.sketches.betas[0], y[:6]), atol=1e-12
        )
        assert dot_test(rop, trials=5).passed

    def test_rop_block_dimension_check(self):
        with pytest.raises(DimensionMismatchError):
            rop_block(self.sketches.alphas[0], self.sketches.betas[0], np.ones(15))

    def test_modulation_matches_kronecker(self):
        """Test that the blockwise path equals (Gamma^T kron Id_P)."""
        gamma = SketchEnsemble.draw(2, 3, 4, 2, seed=3).modulations
        y = np.random.default_rng(2).standard_normal(12) + 0j
        dense = np.kron(gamma.T, np.eye(3))

        np.testing.assert_allclose(Modulation(gamma, 3).forward(y), dense @ y, atol=1e-12)
        np.testing.assert_allclose(modulation_op(gamma, y, 3), dense @ y, atol=1e-12)
        np.testing.assert_allclose(Modulation(gamma, 3).adjoint(dense @ y), dense.T @ dense @ y, atol=1e-12)

    def test_selector_embeds_zeros(self):
        selector = OffDiagonalSelector(3, 2)
        v = np.arange(18.0)

        kept = selector.forward(v)

        assert kept.size == 12
        assert 0.0 not in kept and 4.0 not in kept
        back = selector.adjoint(kept)
        assert back[0] == 0 and back[4] == 0 and back[1] == 1.0


class TestSensingModel:
    """Tests for the MROP and IROP imaging operators."""

    def setup_method(self):
        self.plan = VisibilityPlan(side=16, positions=ON_GRID_POSITIONS)
        self.sketches = SketchEnsemble.draw(4, 5, 2, 3, seed=21)
        self.model = SensingModel(self.plan, self.sketches, backend="nudft")

    def test_shapes(self):
        assert self.model.mrop().shape == (15, 256)
        assert self.model.irop().shape == (5, 256)
        assert self.model.irop_centered().shape == (5, 256)

    def test_batch_mismatch(self):
        with pytest.raises(DimensionMismatchError, match="batches"):
            SensingModel(self.plan, SketchEnsemble.draw(4, 5, 3, 3, seed=0), backend="nudft")

    def test_threaded_model_matches_serial(self):
        threaded = SensingModel(self.plan, self.sketches, backend="nudft", workers=2)
        x = random_sparse_sky(16, 3, seed=6).values
        z = np.random.default_rng(7).standard_normal(15) + 0j

        assert relative_error(threaded.mrop().forward(x), self.model.mrop().forward(x)) <= 1e-12
        assert relative_error(threaded.mrop().adjoint(z), self.model.mrop().adjoint(z)) <= 1e-12

    def test_mrop_matches_dense_product(self):
        img = random_sparse_sky(16, 3, seed=4)
        dense = (
            self.model.modulation.to_dense()
            @ self.model.rop.to_dense()
            @ self.model.visibility.to_dense()
        )

        assert relative_error(forward_mrop(self.model, img), dense @ img.values) <= 1e-10

    def test_centered_irop_matches_dense_product(self):
        values = np.zeros(256)
        values[37] = 1.0
        mask = np.diag(self.plan.offdiagonal_mask.astype(float))
        dense = (
            self.model.integration.to_dense()
            @ self.model.rop.to_dense()
            @ mask
            @ self.model.visibility.to_dense()
        )

        result = forward_irop_centered(self.model, SkyImage(side=16, values=values))

        assert relative_error(result, dense @ values) <= 1e-10

    def test_centered_irop_annihilates_constant_image(self):
        constant = np.ones(256)

        z = self.model.irop_centered().forward(constant)

        assert np.linalg.norm(z) <= 1e-10 * np.linalg.norm(self.model.irop().forward(constant))

    def test_dc_centering_on_grid(self):
        """Test that subtracting the DC template recovers the centered measurements."""
        img = random_sparse_sky(16, 7, seed=9)
        template = self.model.dc_template(integrated=True)

        centered = center_measurements(self.model.irop().forward(img.values), dc_component(img), template)

        np.testing.assert_allclose(centered, self.model.irop_centered().forward(img.values), atol=1e-10)

    def test_center_measurements_shape_check(self):
        with pytest.raises(DimensionMismatchError):
            center_measurements(np.ones(3), 1.0, np.ones(4))

    def test_all_operators_pass_dot_test(self):
        for i, op in enumerate(self.model.operators()):
            assert dot_test(op, trials=5, seed=i).passed, op.name

    def test_hollow_and_gram_form(self):
        img = random_sparse_sky(16, 3, seed=2)
        matrix = interferometric_matrix(img, ON_GRID_POSITIONS[0], self.plan.pixel_size)

        assert np.all(np.diag(hollow(matrix)) == 0)
        np.testing.assert_allclose(np.diag(matrix).real, self.plan.pixel_size ** 2 * img.values.sum())


class TestPostSensing:
    """Tests for Gaussian projection, averaging and visibility noise."""

    def test_gaussian_projection_deterministic(self):
        v = np.ones(50, dtype=complex)

        np.testing.assert_array_equal(gaussian_postsensing(4, v, 10), gaussian_postsensing(4, v, 10))
        assert not np.allclose(gaussian_postsensing(4, v, 10), gaussian_postsensing(5, v, 10))

    def test_gaussian_projection_variance(self):
        dense = GaussianProjection(400, 100, seed=1).to_dense()

        assert np.mean(np.abs(dense) ** 2) == pytest.approx(1 / 100, rel=0.05)

    def test_gaussian_projection_adjoint_across_blocks(self):
        op = GaussianProjection(30, 17, seed=2, block_rows=4)

        assert dot_test(op, trials=5).passed

    def test_zero_threshold_keeps_everything(self, small_plan):
        matrix = averaging_matrix(small_plan, freq_threshold=0.0, group_size=2)

        assert matrix.shape == (small_plan.num_rows, small_plan.num_rows)
        assert matrix.nnz == small_plan.num_rows

    def test_large_threshold_averages_groups(self, small_plan):
        v = np.arange(small_plan.num_rows, dtype=complex)

        reduced = baseline_dependent_averaging(small_plan, v, freq_threshold=1e6, group_size=3)

        assert reduced.size == small_plan.rows_per_batch
        np.testing.assert_allclose(reduced, v.reshape(3, 16).mean(axis=0))

    def test_averaging_operator_adjoint(self, small_plan):
        assert dot_test(averaging_operator(small_plan, 2.0, 2), trials=5).passed

    def test_invalid_group(self, small_plan):
        with pytest.raises(ValueError, match="group_size"):
            averaging_matrix(small_plan, 1.0, 0)

    def test_noise_is_hermitian_per_batch(self):
        v = np.zeros(2 * 9, dtype=complex)

        noisy = add_visibility_noise(v, 0.3, seed=1, num_antennas=3)

        for block in noisy.reshape(2, 3, 3):
            np.testing.assert_allclose(block, block.conj().T)

    def test_noise_variance(self):
        noisy = add_visibility_noise(np.zeros(400 * 16, dtype=complex), 0.5, seed=2, num_antennas=4)
        off = noisy.reshape(400, 4, 4)[:, ~np.eye(4, dtype=bool)]

        assert np.mean(np.abs(off) ** 2) == pytest.approx(0.25, rel=0.1)

    def test_zero_sigma_returns_copy(self):
        v = np.ones(9, dtype=complex)
        out = add_visibility_noise(v, 0.0, seed=0, num_antennas=3)

        np.testing.assert_array_equal(out, v)
        assert out is not v

    def test_noise_length_check(self):
        with pytest.raises(ValueError, match="multiple"):
            add_visibility_noise(np.ones(10), 0.1, seed=0, num_antennas=3)
