"""
Earth-rotation synthesis.

Rotates ENU antenna positions into the (u, v) plane for each batch hour
angle and forms the ordered baseline sets.
"""

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.spatial import cKDTree

from src.geometry.layout import ArrayLayout

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BatchGeometry:
    """
    Projected antenna positions and baselines of one batch.

    Attributes:
        batch_index: 1-based batch number b
        hour_angle: Hour angle of the batch midpoint (radians)
        positions: (Q, 2) projected positions in wavelengths
        baselines: (Q(Q-1), 2) ordered baselines nu_jk = p_j - p_k
        pairs: (Q(Q-1), 2) antenna index pairs (j, k) matching ``baselines``
    """
    batch_index: int
    hour_angle: float
    positions: np.ndarray
    baselines: np.ndarray
    pairs: np.ndarray

    @property
    def num_antennas(self) -> int:
        return int(self.positions.shape[0])


@dataclass
class CollisionReport:
    """Result of the distinct-visibility scan."""
    collisions: int
    total_baselines: int
    tolerance: float
    min_separation: float
    scale: float = 1.0

    @property
    def distinct(self) -> bool:
        """True when no two baselines are closer than the tolerance."""
        return self.collisions == 0

    def to_dict(self) -> dict:
        return {
            "collisions": self.collisions,
            "total_baselines": self.total_baselines,
            "tolerance": self.tolerance,
            "min_separation": self.min_separation,
            "scale": self.scale,
            "distinct": self.distinct,
        }


def baseline_pairs(num_antennas: int) -> np.ndarray:
    """Ordered off-diagonal antenna pairs (j, k), j != k, in row-major order."""
    j, k = np.meshgrid(np.arange(num_antennas), np.arange(num_antennas), indexing="ij")
    mask = j != k
    return np.column_stack([j[mask], k[mask]]).astype(np.int64)


def enu_to_equatorial(enu: np.ndarray, latitude: float) -> np.ndarray:
    """Convert ENU offsets to the local equatorial (X, Y, Z) frame."""
    east, north, up = enu[:, 0], enu[:, 1], enu[:, 2]
    sin_lat, cos_lat = np.sin(latitude), np.cos(latitude)
    x = -sin_lat * north + cos_lat * up
    y = east
    z = cos_lat * north + sin_lat * up
    return np.column_stack([x, y, z])


def project_uv(xyz: np.ndarray, hour_angle: float, declination: float) -> np.ndarray:
    """
    Project equatorial positions onto the (u, v) plane.

    The w coordinate is dropped (small field of view).
    """
    sin_h, cos_h = np.sin(hour_angle), np.cos(hour_angle)
    sin_d, cos_d = np.sin(declination), np.cos(declination)
    projection = np.array([
        [sin_h, cos_h, 0.0],
        [-sin_d * cos_h, sin_d * sin_h, cos_d],
    ])
    return xyz @ projection.T


def batch_hour_angles(layout: ArrayLayout) -> np.ndarray:
    """Midpoints of B equal subdivisions of the hour-angle span."""
    start, end = layout.hour_angle_span
    edges = np.linspace(start, end, layout.num_batches + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def synthesize_batches(layout: ArrayLayout) -> List[BatchGeometry]:
    """
    Apply Earth-rotation synthesis to a layout.

    Args:
        layout: Antenna layout and synthesis parameters

    Returns:
        One BatchGeometry per batch, in batch order
    """
    xyz = enu_to_equatorial(layout.antennas, layout.latitude)
    pairs = baseline_pairs(layout.num_antennas)
    pairs.setflags(write=False)

    batches = []
    for b, hour_angle in enumerate(batch_hour_angles(layout), start=1):
        positions = project_uv(xyz, hour_angle, layout.declination) / layout.wavelength
        baselines = positions[pairs[:, 0]] - positions[pairs[:, 1]]
        positions.setflags(write=False)
        baselines.setflags(write=False)
        batches.append(BatchGeometry(
            batch_index=b,
            hour_angle=float(hour_angle),
            positions=positions,
            baselines=baselines,
            pairs=pairs,
        ))

    total = sum(len(batch.baselines) for batch in batches)
    logger.info(f"Synthesized {len(batches)} batches, {total} baselines")
    return batches


def uv_coverage(batches: Sequence[BatchGeometry]) -> np.ndarray:
    """All baselines of all batches stacked into one (V, 2) array."""
    if not batches:
        return np.zeros((0, 2))
    return np.concatenate([batch.baselines for batch in batches], axis=0)


def check_distinct_visibilities(
    batches: Sequence[BatchGeometry],
    tolerance: float = 1e-9,
    scale: float = 1.0,
) -> CollisionReport:
    """
    Count baseline pairs closer than a tolerance across all batches.

    Baselines are converted to grid units with ``scale`` before the scan,
    so ``tolerance`` and the reported separation are in grid units. Pass
    ``VisibilityPlan.scale``; the default 1.0 scans in wavelengths.

    Args:
        batches: Synthesized batches
        tolerance: Distance threshold in grid units
        scale: Grid units per wavelength

    Returns:
        CollisionReport; zero collisions means all visibilities are distinct
    """
    if not batches:
        raise ValueError("At least one batch is required")

    points = uv_coverage(batches) * scale
    if len(points) < 2:
        return CollisionReport(0, len(points), tolerance, float("inf"), scale)

    tree = cKDTree(points)
    collisions = len(tree.query_pairs(r=tolerance))
    distances, _ = tree.query(points, k=2)
    min_separation = float(distances[:, 1].min())

    if collisions:
        logger.warning(f"{collisions} baseline pairs closer than {tolerance:g} grid units")
    return CollisionReport(collisions, len(points), tolerance, min_separation, scale)
