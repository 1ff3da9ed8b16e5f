"""
Unit tests for array layouts and Earth-rotation synthesis.

Tests the VLA-like generator, CSV round trips, baseline sets and the
distinct-visibility scan.
"""

import numpy as np
import pytest

from src.errors import ConfigurationError
from src.geometry import (
    ArrayLayout,
    baseline_pairs,
    check_distinct_visibilities,
    load_layout_csv,
    make_random_layout,
    make_vla_like,
    resolve_layout,
    save_layout_csv,
    synthesize_batches,
    uv_coverage,
)


class TestArrayLayout:
    """Tests for layout validation."""

    def test_duplicate_positions_rejected(self):
        """Test that two antennas at the same spot raise ValueError."""
        with pytest.raises(ValueError, match="distinct"):
            ArrayLayout(antennas=[[0, 0, 0], [0, 0, 0]])

    def test_bad_shape_rejected(self):
        with pytest.raises(ValueError, match=r"\(Q, 3\)"):
            ArrayLayout(antennas=[[0, 0], [1, 1]])

    def test_nonpositive_wavelength_rejected(self):
        with pytest.raises(ValueError, match="Wavelength"):
            ArrayLayout(antennas=[[0, 0, 0], [1, 0, 0]], wavelength=0.0)

    def test_default_names(self):
        """Test that names are generated when omitted."""
        layout = ArrayLayout(antennas=[[0, 0, 0], [1, 0, 0]])

        assert layout.names == ("ANT000", "ANT001")
        assert layout.num_antennas == 2

    def test_positions_frozen(self):
        layout = ArrayLayout(antennas=[[0, 0, 0], [1, 0, 0]])

        with pytest.raises(ValueError):
            layout.antennas[0, 0] = 5.0


class TestVlaLike:
    """Tests for the Y-array generator."""

    def test_full_array_has_27_antennas(self):
        layout = make_vla_like(9, 1e4)

        assert layout.num_antennas == 27
        assert layout.num_visibilities == 27 * 26 * 100

    def test_single_antenna_per_arm_is_symmetric(self):
        """Test that one antenna per arm gives three antennas at radius 1, 120 degrees apart."""
        layout = make_vla_like(1, 1.0)
        xy = layout.antennas[:, :2]

        np.testing.assert_allclose(np.linalg.norm(xy, axis=1), 1.0)
        cosines = [xy[i] @ xy[(i + 1) % 3] for i in range(3)]
        np.testing.assert_allclose(cosines, -0.5, atol=1e-12)

    def test_power_law_radius(self):
        layout = make_vla_like(2, 100.0)
        radii = np.sort(np.linalg.norm(layout.antennas, axis=1))

        assert radii[0] == pytest.approx(100.0 * 0.5 ** 1.716)
        assert radii[0] == pytest.approx(30.44, abs=0.01)
        assert radii[-1] == pytest.approx(100.0)

    @pytest.mark.parametrize("num_per_arm, r_max", [(0, 1.0), (3, 0.0), (3, -5.0)])
    def test_invalid_parameters(self, num_per_arm, r_max):
        with pytest.raises(ConfigurationError):
            make_vla_like(num_per_arm, r_max)


class TestLayoutCsv:
    """Tests for CSV import and export."""

    def test_round_trip(self, tmp_path):
        layout = make_vla_like(3, 500.0)
        path = save_layout_csv(layout, tmp_path / "array.csv")

        loaded = load_layout_csv(path)

        assert loaded.names == layout.names
        np.testing.assert_array_equal(loaded.antennas, layout.antennas)

    def test_header_written(self, tmp_path):
        path = save_layout_csv(make_vla_like(1, 1.0), tmp_path / "array.csv")

        assert path.read_text().splitlines()[0] == "name,east_m,north_m,up_m"

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError, match="not found"):
            load_layout_csv(tmp_path / "nope.csv")

    def test_missing_columns(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("name,east_m\nA,1.0\n")

        with pytest.raises(ConfigurationError, match="missing columns"):
            load_layout_csv(path)

    def test_bad_coordinate_reports_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("name,east_m,north_m,up_m\nA,0,0,0\nB,x,0,0\n")

        with pytest.raises(ConfigurationError, match=":3:"):
            load_layout_csv(path)

    def test_csv_takes_precedence(self, tmp_path):
        path = save_layout_csv(make_random_layout(4, 100.0, seed=1), tmp_path / "array.csv")

        assert resolve_layout(path, num_per_arm=9).num_antennas == 4
        assert resolve_layout(None, num_per_arm=2).num_antennas == 6


class TestSynthesis:
    """Tests for batch synthesis and baseline sets."""

    def setup_method(self):
        self.layout = make_random_layout(5, 300.0, seed=3, num_batches=4)
        self.batches = synthesize_batches(self.layout)

    def test_batch_and_baseline_counts(self):
        assert len(self.batches) == 4
        assert [b.batch_index for b in self.batches] == [1, 2, 3, 4]
        for batch in self.batches:
            assert batch.baselines.shape == (20, 2)

    def test_baselines_antisymmetric(self):
        """Test that V_b equals -V_b with nu_jk = -nu_kj."""
        for batch in self.batches:
            lookup = {tuple(p): i for i, p in enumerate(batch.pairs)}
            for i, (j, k) in enumerate(batch.pairs):
                np.testing.assert_array_equal(batch.baselines[i], -batch.baselines[lookup[(k, j)]])

    def test_no_zero_baseline(self):
        for batch in self.batches:
            assert np.all(np.linalg.norm(batch.baselines, axis=1) > 0)

    def test_deterministic(self):
        again = synthesize_batches(self.layout)

        for a, b in zip(self.batches, again):
            np.testing.assert_array_equal(a.positions, b.positions)
            np.testing.assert_array_equal(a.baselines, b.baselines)

    def test_single_antenna_has_no_baselines(self):
        layout = ArrayLayout(antennas=[[0.0, 0.0, 0.0]], num_batches=3)

        batches = synthesize_batches(layout)

        assert all(len(b.baselines) == 0 for b in batches)
        assert uv_coverage(batches).shape == (0, 2)

    def test_pole_projection_is_planar_rotation(self):
        """Test that at declination 90 degrees an east-west array rotates with the hour angle."""
        east = np.array([0.0, 10.0, 25.0])
        layout = ArrayLayout(
            antennas=np.column_stack([east, np.zeros(3), np.zeros(3)]),
            wavelength=0.5,
            declination=np.pi / 2,
            hour_angle_span=(0.0, 1.0),
            num_batches=2,
        )

        for batch, h in zip(synthesize_batches(layout), (0.25, 0.75)):
            expected = np.column_stack([east * np.cos(h), east * np.sin(h)]) / 0.5
            np.testing.assert_allclose(batch.positions, expected, atol=1e-12)

    def test_vla_visibility_count(self):
        batches = synthesize_batches(make_vla_like(9, 1e4, num_batches=100))

        assert sum(len(b.baselines) for b in batches) == 70200

    def test_baseline_pairs_order(self):
        np.testing.assert_array_equal(baseline_pairs(3), [[0, 1], [0, 2], [1, 0], [1, 2], [2, 0], [2, 1]])


class TestDistinctVisibilities:
    """Tests for the collision scan."""

    def test_vla_synthesis_distinct(self):
        batches = synthesize_batches(make_vla_like(9, 1e4, num_batches=100))

        report = check_distinct_visibilities(batches, tolerance=1e-9)

        assert report.collisions == 0
        assert report.distinct
        assert report.total_baselines == 70200

    def test_identical_batches_collide(self):
        """Test that two batches without rotation collide pairwise."""
        layout = make_random_layout(4, 100.0, seed=2, hour_angle_span=(0.0, 0.0), num_batches=2)

        report = check_distinct_visibilities(synthesize_batches(layout))

        assert report.collisions == 4 * 3
        assert not report.distinct

    def test_two_antennas_single_batch(self):
        layout = ArrayLayout(antennas=[[0, 0, 0], [100, 0, 0]], num_batches=1)

        report = check_distinct_visibilities(synthesize_batches(layout))

        assert report.collisions == 0
        assert report.to_dict()["distinct"] is True

    def test_scale_converts_to_grid_units(self):
        """Test that the tolerance applies after conversion to grid units."""
        layout = make_random_layout(4, 100.0, seed=3, num_batches=2)
        batches = synthesize_batches(layout)
        wavelengths = check_distinct_visibilities(batches)

        report = check_distinct_visibilities(batches, tolerance=0.5 * wavelengths.min_separation, scale=1e-3)

        assert report.scale == 1e-3
        assert report.min_separation == pytest.approx(1e-3 * wavelengths.min_separation)
        assert report.collisions > 0

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError):
            check_distinct_visibilities([])
