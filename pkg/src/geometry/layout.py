"""
Antenna layouts for Earth-rotation synthesis.

Provides the ArrayLayout container, a VLA-like Y-array generator, a seeded
random planar array and CSV import/export.
"""

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from src.errors import ConfigurationError

logger = logging.getLogger(__name__)

VLA_ARM_EXPONENT = 1.716
VLA_LATITUDE = float(np.deg2rad(34.0784))
VLA_ARM_AZIMUTHS = (0.0, 120.0, 240.0)

HOUR_ANGLE_RATE = 2.0 * np.pi / 24.0  # radians per hour
FIVE_HOUR_SPAN = (-2.5 * HOUR_ANGLE_RATE, 2.5 * HOUR_ANGLE_RATE)

CSV_HEADER = ["name", "east_m", "north_m", "up_m"]


@dataclass(frozen=True)
class ArrayLayout:
    """
    Antenna geometry and synthesis parameters.

    Attributes:
        antennas: (Q, 3) East-North-Up positions in meters
        wavelength: Observing wavelength in meters
        declination: Phase-center declination in radians
        hour_angle_span: (start, end) hour angles in radians
        num_batches: Number of short-time integration batches B
        latitude: Observatory latitude in radians
        names: Antenna names, generated when omitted
    """
    antennas: np.ndarray
    wavelength: float = 0.21
    declination: float = float(np.deg2rad(45.0))
    hour_angle_span: Tuple[float, float] = FIVE_HOUR_SPAN
    num_batches: int = 100
    latitude: float = VLA_LATITUDE
    names: Tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        """Validate geometry and freeze the position array."""
        antennas = np.array(self.antennas, dtype=np.float64)
        if antennas.ndim != 2 or antennas.shape[1] != 3:
            raise ValueError(f"antennas must be a (Q, 3) array, got shape {antennas.shape}")
        if antennas.shape[0] < 1:
            raise ValueError("At least one antenna is required")
        if not np.all(np.isfinite(antennas)):
            raise ValueError("Antenna positions must be finite")
        if self.wavelength <= 0:
            raise ValueError(f"Wavelength must be positive, got {self.wavelength}")
        if self.num_batches < 1:
            raise ValueError(f"num_batches must be >= 1, got {self.num_batches}")

        start, end = self.hour_angle_span
        if end < start:
            raise ValueError(f"hour_angle_span must be increasing, got {self.hour_angle_span}")

        if len(np.unique(antennas, axis=0)) != len(antennas):
            raise ValueError("Antenna positions must be distinct")

        names = tuple(self.names) if self.names else tuple(
            f"ANT{i:03d}" for i in range(len(antennas))
        )
        if len(names) != len(antennas):
            raise ValueError(f"Got {len(names)} names for {len(antennas)} antennas")

        antennas.setflags(write=False)
        object.__setattr__(self, "antennas", antennas)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "hour_angle_span", (float(start), float(end)))

    @property
    def num_antennas(self) -> int:
        """Number of antennas Q."""
        return int(self.antennas.shape[0])

    @property
    def num_visibilities(self) -> int:
        """Off-diagonal visibility count Q(Q-1)B."""
        q = self.num_antennas
        return q * (q - 1) * self.num_batches


def make_vla_like(
    num_per_arm: int,
    r_max: float,
    **layout_kwargs,
) -> ArrayLayout:
    """
    Build a Y-shaped array with a power-law antenna spacing along each arm.

    Antenna i (1-based) on each arm sits at radius r_max * (i / n) ** 1.716.

    Args:
        num_per_arm: Antennas per arm
        r_max: Outermost radius in meters
        **layout_kwargs: Forwarded to ArrayLayout (wavelength, declination, ...)

    Returns:
        ArrayLayout with 3 * num_per_arm antennas

    Raises:
        ConfigurationError: If parameters are out of range
    """
    if num_per_arm < 1:
        raise ConfigurationError(f"num_per_arm must be >= 1, got {num_per_arm}")
    if r_max <= 0:
        raise ConfigurationError(f"r_max must be positive, got {r_max}")

    radii = r_max * (np.arange(1, num_per_arm + 1) / num_per_arm) ** VLA_ARM_EXPONENT

    positions = []
    names = []
    for arm, azimuth_deg in zip("NEW", VLA_ARM_AZIMUTHS):
        azimuth = np.deg2rad(azimuth_deg)
        for i, radius in enumerate(radii, start=1):
            positions.append((radius * np.sin(azimuth), radius * np.cos(azimuth), 0.0))
            names.append(f"{arm}{i:02d}")

    try:
        layout = ArrayLayout(antennas=np.array(positions), names=tuple(names), **layout_kwargs)
    except ValueError as e:
        raise ConfigurationError(str(e)) from e

    logger.info(f"Built VLA-like array: {layout.num_antennas} antennas, r_max={r_max:g} m")
    return layout


def make_random_layout(
    num_antennas: int,
    radius: float,
    seed: int,
    **layout_kwargs,
) -> ArrayLayout:
    """
    Seeded random planar array with antennas uniform in a disc.

    Args:
        num_antennas: Number of antennas Q
        radius: Disc radius in meters
        seed: Generator seed
        **layout_kwargs: Forwarded to ArrayLayout

    Returns:
        ArrayLayout
    """
    if num_antennas < 1 or radius <= 0:
        raise ConfigurationError(
            f"Invalid random layout parameters: Q={num_antennas}, radius={radius}"
        )
    rng = np.random.default_rng(seed)
    r = radius * np.sqrt(rng.uniform(0.0, 1.0, num_antennas))
    theta = rng.uniform(0.0, 2.0 * np.pi, num_antennas)
    positions = np.column_stack([r * np.cos(theta), r * np.sin(theta), np.zeros(num_antennas)])
    return ArrayLayout(antennas=positions, **layout_kwargs)


def load_layout_csv(path: Union[str, Path], **layout_kwargs) -> ArrayLayout:
    """
    Load antenna positions from a CSV file.

    The file needs the header ``name,east_m,north_m,up_m``.

    Raises:
        ConfigurationError: If the file is missing or malformed
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"Array layout file not found: {path}")

    names: List[str] = []
    positions: List[Tuple[float, float, float]] = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        missing = set(CSV_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ConfigurationError(f"{path}: missing columns {sorted(missing)}")
        for line_no, row in enumerate(reader, start=2):
            try:
                positions.append((float(row["east_m"]), float(row["north_m"]), float(row["up_m"])))
            except (TypeError, ValueError) as e:
                raise ConfigurationError(f"{path}:{line_no}: bad coordinate ({e})") from e
            names.append(row["name"].strip())

    if not positions:
        raise ConfigurationError(f"{path}: no antennas")

    try:
        layout = ArrayLayout(antennas=np.array(positions), names=tuple(names), **layout_kwargs)
    except ValueError as e:
        raise ConfigurationError(f"{path}: {e}") from e

    logger.info(f"Loaded {layout.num_antennas} antennas from {path}")
    return layout


def save_layout_csv(layout: ArrayLayout, path: Union[str, Path]) -> Path:
    """Write antenna positions with the ``name,east_m,north_m,up_m`` header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(CSV_HEADER)
        for name, (east, north, up) in zip(layout.names, layout.antennas):
            writer.writerow([name, repr(float(east)), repr(float(north)), repr(float(up))])
    return path


def resolve_layout(
    csv_path: Optional[Union[str, Path]] = None,
    num_per_arm: int = 9,
    r_max: float = 1e4,
    **layout_kwargs,
) -> ArrayLayout:
    """CSV layouts take precedence over the built-in generator."""
    if csv_path is not None:
        return load_layout_csv(csv_path, **layout_kwargs)
    return make_vla_like(num_per_arm, r_max, **layout_kwargs)
